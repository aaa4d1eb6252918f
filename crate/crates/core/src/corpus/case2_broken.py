class Workflow:
    def __init__(
        self,
        problem
    ) -> None:
        self.problem = problem
        self.gid = None
        self.custom1 = operator.Custom("llm_symbol", self.gid, self.problem)
        self.custom2 = operator.Custom("llm_symbol", self.gid, self.problem)
        self.programmer = operator.Programmer("llm_symbol", self.gid, self.problem)
        self.review1 = operator.Review("llm_symbol", self.gid, self.problem)
        self.review2 = operator.Review("llm_symbol", self.gid, self.problem)
        self.sc_ensemble = operator.ScEnsemble("llm_symbol", self.gid, self.problem)

    async def run_workflow(self):
        analysis = await self.custom1(instruction="...")
        refined_analysis = await self.custom2(instruction="...")
        program_solution1 = await self.programmer(analysis=analysis)
        
        reviewed_solution1 = await self.review1(pre_solution=program_solution1)
        
        program_solution2 = await self.programmer(analysis=refined_analysis)
        reviewed_solution2 = await self.review2(pre_solution=program_solution2)
        
        final_solution = await self.sc_ensemble(solutions=[reviewed_solution1, reviewed_solution2])
        return final_solution
