//! Reference workflow listings in the dialect.
//!
//! Five task workflows (multi-hop QA, code generation, deep research, math,
//! open-domain QA) plus before/after pairs for two repaired workflows. The
//! deep-research listing uses loops, sets and string interpolation outside
//! the dialect and is kept as a negative case.

pub const HOTPOTQA: &str = include_str!("corpus/hotpotqa.py");
pub const HUMANEVAL: &str = include_str!("corpus/humaneval.py");
pub const BROWSECOMP: &str = include_str!("corpus/browsecomp.py");
pub const MATH: &str = include_str!("corpus/math.py");
pub const NQ: &str = include_str!("corpus/nq.py");

/// Code workflow that crashes when ensemble selection returns nothing.
pub const CASE1_BROKEN: &str = include_str!("corpus/case1_broken.py");
/// Same workflow with an is-empty fallback after the ensemble.
pub const CASE1_FIXED: &str = include_str!("corpus/case1_fixed.py");
/// Math workflow whose review steps return malformed structured output.
pub const CASE2_BROKEN: &str = include_str!("corpus/case2_broken.py");
/// Same workflow with the review steps bypassed.
pub const CASE2_FIXED: &str = include_str!("corpus/case2_fixed.py");

/// Two-role open-domain QA template with placeholder slots.
pub const QA_TEMPLATE: &str = include_str!("corpus/implementer_example.py");

/// Every listing expected to parse, by name.
pub const PARSEABLE: [(&str, &str); 9] = [
    ("hotpotqa", HOTPOTQA),
    ("humaneval", HUMANEVAL),
    ("math", MATH),
    ("nq", NQ),
    ("case1_broken", CASE1_BROKEN),
    ("case1_fixed", CASE1_FIXED),
    ("case2_broken", CASE2_BROKEN),
    ("case2_fixed", CASE2_FIXED),
    ("qa_template", QA_TEMPLATE),
];
