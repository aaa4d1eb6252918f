class Workflow:
    def __init__(
        self,
        problem
    ) -> None:
        self.problem = problem
        self.custom1 = operator.Custom("qwen/qwen-2.5-72b-instruct", self.problem)
        self.custom2 = operator.Custom("gpt-4o-mini", self.problem)
        self.sc_ensemble = operator.ScEnsemble("gpt-4o", self.problem)
        self.review = operator.Review("qwen/qwq-32b", self.problem)
        self.answer_generate = operator.AnswerGenerate("gpt-4o-mini", self.problem)

    async def run_workflow(self):
        """
        This is a workflow graph.
        """
        # Generate multiple candidate solutions with different instructions
        candidate1 = await self.custom1("Generate a detailed answer with reasoning.")
        candidate2 = await self.custom2("Provide a concise direct answer.")

        # Ensemble to select the best candidate
        best_solution = await self.sc_ensemble([candidate1, candidate2])

        # Review the best solution to improve it
        reviewed_solution = await self.review(best_solution)

        # Generate final answer based on the reviewed solution
        final_answer = await self.answer_generate()

        return final_answer
