class Workflow:
    def __init__(
        self,
        problem
    ) -> None:
        self.problem = problem
        self.code_generate_1 = operator.CustomCodeGenerate("gpt-4o-mini", self.problem)
        self.code_generate_2 = operator.CustomCodeGenerate("qwen/qwen3-14b", self.problem)
        self.code_generate_3 = operator.CustomCodeGenerate("gpt-4o-mini", self.problem)
        self.sc_ensemble = operator.ScEnsemble("gpt-4o", self.problem)
        self.test = operator.Test("gpt-4o-mini", self.problem)

    async def run_workflow(self):
        """
        This is a workflow graph.
        """
        solution_list = []
        for _ in range(3):
            solution = await self.code_generate_1(instruction="Please analyze the problem step by step and generate the code solution.")
            solution_list.append(solution)
        
        ensembled_solution = await self.sc_ensemble(solutions=solution_list)
        
        tested_solution = await self.test(solution=tested_solution if 'tested_solution' in locals() else ensembled_solution)
        
        return tested_solution
