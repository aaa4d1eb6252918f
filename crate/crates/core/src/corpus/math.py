class Workflow:
    def __init__(
        self,
        problem
    ) -> None:
        self.problem = problem
        self.gid = None
        # IMPORTANT: Each operator MUST be initialized with a model placeholder string "gpt-4o-mini"
        self.custom1 = operator.Custom("gpt-4o-mini", self.gid, self.problem)
        self.custom2 = operator.Custom("gpt-5-mini", self.gid, self.problem)
        self.programmer = operator.Programmer("qwen/qwen3-coder", self.gid, self.problem)
        self.review = operator.Review("gpt-5-mini", self.gid, self.problem)
        self.sc_ensemble = operator.ScEnsemble("gpt-5-mini", self.gid, self.problem)

    async def run_workflow(self):
        """
        This is a workflow graph.
        """
        # Step 1: Break down the problem into detailed steps with reasoning
        analysis1 = await self.custom1(instruction="Can you solve this problem by breaking it down into detailed steps and explaining the reasoning behind each step?")
        
        # Step 2: Explain how to solve the problem with clear reasoning for each step (independent second analysis)
        analysis2 = await self.custom2(instruction="Explain how to solve the problem with clear reasoning for each step.")
        
        # Step 3: Use programmer to write and execute code based on first analysis
        program_solution1 = await self.programmer(analysis=analysis1)
        
        # Step 4: Use programmer to write and execute code based on second analysis
        program_solution2 = await self.programmer(analysis=analysis2)
        
        # Step 5: Ensemble the two program solutions to select the best one
        ensembled_solution = await self.sc_ensemble(solutions=[program_solution1, program_solution2])
        
        # Step 6: Review the ensembled solution to regenerate improved solution
        final_solution = await self.review(pre_solution=ensembled_solution)
        
        return final_solution
