class Workflow:
    def __init__(
        self,
        problem
    ) -> None:
        self.problem = problem
        self.custom = operator.Custom("gpt-4o", self.problem)
        self.search = operator.Search("gpt-4o-mini", self.problem)
        self.browser = operator.Browser("gpt-4o-mini", self.problem)
        self.answer_generate = operator.AnswerGenerate("gpt-4o", self.problem)

    async def run_workflow(self):
        search_history = set()
        collected_evidence = ""
        max_iterations = 3
        iteration = 0
        query = self.problem

        while iteration < max_iterations:
            iteration += 1
            # Reflection: plan and rewrite query to optimize search
            reflection_prompt = f"<think>Iteration {iteration}: Plan a precise search query to find the learning institution matching all given criteria. Avoid repeating previous queries: {list(search_history)}</think>"
            rewritten_query = await self.custom(instruction=reflection_prompt)
            rewritten_query = rewritten_query.strip()
            if not rewritten_query or rewritten_query in search_history:
                # fallback to original problem if rewriting fails or repeats
                rewritten_query = query
            search_history.add(rewritten_query)

            # Search step
            search_results = await self.search(query=rewritten_query, top_k=5)
            if not search_results:
                # No results found, break early
                break

            # Extract docids and browse for full content
            new_evidence = []
            for result in search_results:
                docid = result.get("docid", "")
                if docid and docid not in search_history:
                    content = await self.browser(docid=docid)
                    if content and str(content).strip():
                        new_evidence.append(str(content).strip())
                    search_history.add(docid)

            if not new_evidence:
                # No new evidence found, break loop
                break

            # Accumulate evidence
            collected_evidence += "\n\n".join(new_evidence) + "\n\n"

            # Reflection: check if sufficient evidence collected
            reflection_check = f"<think>Iteration {iteration}: Given the accumulated evidence, is it sufficient to answer the question? If yes, stop searching. If no, refine the query for next iteration.</think>\n<search>{collected_evidence}</search>"
            decision = await self.custom(instruction=reflection_check)
            decision_lower = decision.lower()
            if "yes" in decision_lower or "sufficient" in decision_lower or "stop" in decision_lower:
                break

        # Final answer generation
        if collected_evidence.strip():
            solution = await self.answer_generate(context=collected_evidence.strip())
        else:
            solution = "Information Not Found in Context"

        return solution
