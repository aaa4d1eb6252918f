class Workflow:
    def __init__(
        self,
        problem
    ) -> None:
        self.problem = problem
        self.code_generate_1 = operator.CustomCodeGenerate("llm_symbol", self.problem)
        self.code_generate_2 = operator.CustomCodeGenerate("llm_symbol", self.problem)
        self.code_generate_3 = operator.CustomCodeGenerate("llm_symbol", self.problem)
        self.sc_ensemble = operator.ScEnsemble("llm_symbol", self.problem)
        self.test = operator.Test("llm_symbol", self.problem)

    async def run_workflow(self):
        solution_list = []
        for _ in range(3):
            solution = await self.code_generate_1(instruction="Please analyze the problem carefully and generate the code solution step by step.")
            solution_list.append(solution)

        ensembled_solution = await self.sc_ensemble(solutions=solution_list)
        tested_solution = await self.test(solution=ensembled_solution)

        return tested_solution
