"""Prompt builders for every agent role.

Each builder returns the user-turn text; callers wrap it into a ChatRequest
with the role's model and sampling settings. Output-format contracts stated
here are what the corresponding parsers in legislator/executor/analysis
expect, so prompt and parser changes must move together.
"""

from __future__ import annotations

from graphforge.graphs import ConstraintGraph, StyleTokens, linearize, serialize

GRAPH_SCHEMA_BLOCK = """\
{
  "graph_id": "G_{t+1}",
  "nodes": [{"id": "v_n", "concept": "string", "description": "string"}],
  "edges": [{"source": "v_i", "target": "v_j", "relation": "string"}],
  "mutation_log": "Summary of changes made in this iteration."
}"""

JSON_FORMAT_REMINDER = (
    "Reminder: output only the JSON object for the updated graph, following the "
    "schema exactly. No other JSON object may precede it."
)

BOXED_ANSWER_INSTRUCTION = (
    "Please reason step by step, and put your final answer within \\boxed{}."
)


def proposer_prompt(style: StyleTokens, current: ConstraintGraph, feedback: str) -> str:
    return f"""You are the Proposer (A_P) in a two-level synthesis framework. Your objective is to drive the meta-level structural evolution of a mathematical problem by optimizing a Constraint Graph G = (V, E).

### Input Data:
- Style Tokens (S):
{style.as_lines()}
- Current Graph (G_t): {serialize(current)}
- Feedback: {feedback or "None"}

### Operational Directives:
- Evolution & Revision: Perform topological mutations to transition G_t to G_{{t+1}}.
- Graph-Style Alignment: Expand nodes V and logical edges E to achieve the graph-related stylistic goals (particularly complexity) specified in S.
- Consistency Maintenance: Rectify any logical contradictions identified in previous feedback.

### Task Workflow:
Step 1: Internal Analysis & Planning
Analyze the gap between the current graph G_t and the target specifications in S. Plan specific mutations (e.g. adding concepts, nesting operators, or refining constraints) to bridge this gap while resolving any reported flaws.
Step 2: Structured Output (JSON)
Generate the updated graph G_{{t+1}} following the strict JSON schema below.

### Final Output Format:
Analysis and Planning: [Your detailed step-by-step thinking process here]
Final Optimized Graph (JSON):
{GRAPH_SCHEMA_BLOCK}
(Constraint: Ensure all referenced nodes in `edges` exist in the `nodes` list)"""


def critic_prompt(style: StyleTokens, proposed: ConstraintGraph, structural_notes: str) -> str:
    return f"""You are the Critic (A_C). Your goal is not merely to check for correctness, but to identify the evolutionary headroom of the proposed graph to push it from functional to exceptional.

### Input for Review:
- Style Tokens (S):
{style.as_lines()}
- Proposed Graph (G_{{t+1}}): {serialize(proposed)}
- Structural Checks: {structural_notes}

### Evaluation Dimensions:
- Internal Consistency: Scrutinize for logical contradictions or ill-defined constraints.
- Specification Alignment: Verify if the graph strictly complies with the complexity and category requirements in S.
- Optimization Potential: Even if requirements are met, provide several actionable suggestions for potential optimization.

### Final Output Format:
- Analysis: [Your detailed step-by-step thinking process here]
- Critical Flaws: [List any issues that violate consistency or S (Output "None" if perfect)]
- Refinement Suggestions: [Propose at least 2-3 specific actions to further optimize the graph's complexity or elegance]
- Expected Utility: [Estimate the marginal gain of these optimizations (High/Medium/Low) to assist the Moderator's decision]"""


def moderator_prompt(style: StyleTokens, proposed: ConstraintGraph, critic_report: str) -> str:
    return f"""You are the Moderator (A_M). You adjudicate the state of the proposed graph based on the Critic's report.

### Data for Decision:
- Critic's Report:
{critic_report}
- Style Tokens (S):
{style.as_lines()}
- Proposed Graph (G_{{t+1}}): {serialize(proposed)}

### Decision Logic:
- Adaptive Truncation: If the graph satisfies S and the potential for further gain is marginal, terminate the process and output the graph.
- Iterative Guidance: Otherwise, direct specific modifications to the Proposer to extend structure or rectify flaws.

### Final Output Format:
- Analysis: [Your detailed step-by-step thinking process here]
- Decision: [Suspend/Continue Iteration]
- Guidance for the Proposer: [If ITERATE: Provide a concise instruction list for the Proposer. If TERMINATE: Output "None"]
- Final Graph: [If TERMINATE: Output the full JSON of the graph. If ITERATE: Output "N/A"]"""


def executor_prompt(graph: ConstraintGraph, style: StyleTokens) -> str:
    return f"""Your task is to perform Semantic Instantiation: converting an abstract Constraint Graph into a high-quality, natural language mathematical problem.

### Input Data:
{linearize(graph, style)}

### Operational Directives:
- Structural Fidelity: Every node and edge must be reflected in the problem. Do not omit constraints.
- Style Alignment: The generated mathematical problem should conform to the constraints specified in the style tokens.
- Semantic Fluency: The problem must be linguistically fluid, not a robotic list of conditions. Ensure logical transitions between the situational narrative and the technical specifications.
- Output Constraint: Generate ONLY the natural language question (Q). Do not provide solutions, explanations, or meta-comments.

### Final Output Format:
- Analysis: [Step-by-step plan: how to map graph nodes to the style context while maintaining fluency]
- Question: [The finalized natural language problem statement]"""


def solver_prompt(question: str) -> str:
    return f"{question}\n{BOXED_ANSWER_INSTRUCTION}"


def verifier_prompt(question: str, answer: str) -> str:
    return f"""You are a strict verification judge for synthesized mathematical training data. Evaluate the question-answer pair below.

### Question:
{question}

### Answer:
{answer}

### Checks:
- question_valid: is the question a well-posed, logically correct, self-contained mathematical problem?
- answer_correct: are the reasoning chain and the final answer mathematically correct?
- qa_consistent: does the answer address exactly what the question asks, with consistent notation and assumptions?

### Final Output Format (three labeled yes/no lines, then a rationale):
question_valid: [yes/no]
answer_correct: [yes/no]
qa_consistent: [yes/no]
rationale: [One short paragraph justifying the three verdicts]"""


def quality_prompt(problem: str) -> str:
    return f"""# Instruction
You need to rate the quality of the math problem based on its clarity, accuracy, and logical coherence.
The rating scale is as follows:

- Very poor: The problem description is ambiguous, conditions are incomplete, or contains logical contradictions. It lacks essential information and context required for solving, or the given instruction is not a mathematical problem.
- Poor: The problem is somewhat unclear or lacks important details. It requires significant clarification to define the solving requirements.
- Average: The problem is moderately clear and accurate but may contain imprecise expressions. Additional information might be needed for a complete solution.
- Good: The problem is clearly structured, with well-defined conditions and logical coherence. It provides sufficient information to support the solving process.
- Excellent: The problem is precisely formulated, with complete conditions and rigorous logic. It contains all necessary elements for solving without redundant information.

## Math Problem to Evaluate
{problem}

## Output Format
First, provide an assessment highlighting the strengths and/or weaknesses of the math problem. Then, output a rating by filling in the placeholders:

"explanation": "[Your assessment analysis]",
"quality": "[very poor/poor/average/good/excellent]"."""


def difficulty_prompt(problem: str) -> str:
    return f"""# Instruction
You are an expert in mathematics education and cognitive task analysis. Your responsibility is to evaluate the complexity of mathematical problems presented by users. For each mathematical problem, you must first identify the required knowledge points, and then assess the difficulty level based on the mathematical concepts involved, problem-solving steps, and cognitive demands.

## Math Problem to Evaluate
{problem}

## Output Format
Given the provided mathematical problem, in your output you must first determine the knowledge points required to solve it. Then, rate the difficulty level of the mathematical problem as 'very easy', 'easy', 'medium', 'hard', or 'very hard'.

Please output the difficulty level below in the following format by filling in the placeholders in [...]:

"explanation": "[Your detailed explanation and reasoning]",
"knowledge": "[list specific mathematical concepts, procedures, or knowledge domains]",
"difficulty": "[very easy/easy/medium/hard/very hard]"."""


def tags_prompt(problem: str) -> str:
    return f"""Identify the mathematical knowledge points required to solve the problem below. Respond with a single JSON array of short lowercase tags (each one to four words), and nothing else.

## Problem
{problem}"""


def init_proposer_prompt(round_index: int, rounds: int, known_summary: str) -> str:
    return f"""You are the Proposer in an initialization roundtable that builds the generation pool for a mathematical problem synthesizer, from scratch, with no seed data.

Propose two things:
1. Style dimensions: stylistic constraint dimensions (for example difficulty), each with a comprehensive list of distinct allowed values.
2. A concept taxonomy: an atlas of mathematical domains with concrete leaf concepts, at most three levels deep.

This is round {round_index} of {rounds}. Items already in the pool (propose new material, do not repeat these):
{known_summary or "None yet."}

Output a single JSON object:
{{
  "style_dimensions": {{"dimension_name": ["value", "..."]}},
  "concept_taxonomy": {{"name": "mathematics", "children": [{{"name": "domain", "children": [], "concepts": ["leaf concept"]}}], "concepts": []}}
}}"""


def init_critic_prompt(candidates_json: str) -> str:
    return f"""You are the Critic in an initialization roundtable. Filter the candidate pool below for orthogonality, validity, and diversity: reject dimensions that overlap existing ones, values that duplicate or blur other values, and concepts that are vague, redundant, or not mathematical.

### Candidates:
{candidates_json}

Output a single JSON object listing ONLY the rejects (empty lists if everything passes):
{{
  "rejected_dimensions": ["dimension_name"],
  "rejected_values": {{"dimension_name": ["value"]}},
  "rejected_concepts": ["leaf concept"]
}}"""
