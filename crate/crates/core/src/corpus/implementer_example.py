class Workflow:
    def __init__(self, problem) -> None:
        self.problem = problem
        self.custom = operator.Custom("llm_symbol", self.problem)
        self.sc_ensemble = operator.ScEnsemble("llm_symbol", self.problem)

    async def run_workflow(self):
        """
        This is a workflow graph for the NQ dataset.
        """
        # Analyze the question with context
        analysis = await self.custom(instruction="Can you analyze this question and provide relevant information from the context?")
        # Ensemble multiple reasoning approaches
        final_answer = await self.sc_ensemble(solutions=[analysis])

        return {"solution": final_answer}
