class Workflow:
    def __init__(
        self,
        problem
    ) -> None:
        self.problem = problem
        self.custom = operator.Custom("qwen/qwen-2.5-72b-instruct", self.problem)
        self.sc_ensemble = operator.ScEnsemble("qwen/qwq-32b", self.problem)
        self.answer_generate = operator.AnswerGenerate("gpt-4o-mini", self.problem)
        self.review = operator.Review("gpt-4o-mini", self.problem)

    async def run_workflow(self):
        """
        This is a workflow graph.
        """
        # Generate multiple candidate solutions with different custom instructions
        instructions = [
            "Provide a detailed explanation and answer.",
            "Give a concise answer with reasoning.",
            "Explain from a scientific perspective."
        ]
        solutions = [await self.custom(instruction) for instruction in instructions]

        # Use ensemble to select the best solution
        best_solution = await self.sc_ensemble(solutions)

        # Review the best solution to improve it
        reviewed_solution = await self.review(best_solution)

        # Generate final answer based on reviewed solution
        final_answer = await self.answer_generate()

        return final_answer
