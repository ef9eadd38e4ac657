//! Table of reply strings and the answer each grammar must extract.

#![allow(dead_code)]

use scriptorium::bench::{extract_answer, AnswerGrammar, ParsedAnswer};

use scriptorium::bench::InvalidAnswer::{self, *};
use AnswerGrammar as G;
use ParsedAnswer as P;

pub struct Case {
    pub raw: &'static str,
    pub grammar: AnswerGrammar,
    pub expected: Result<ParsedAnswer, InvalidAnswer>,
}

fn case(raw: &'static str, grammar: AnswerGrammar, expected: Result<ParsedAnswer, InvalidAnswer>) -> Case {
    Case { raw, grammar, expected }
}

const OPT: AnswerGrammar = G::Option { last: 'D' };
const PCT: AnswerGrammar = G::Integer { max: Some(100) };
const COUNT: AnswerGrammar = G::Integer { max: None };

fn items(xs: &[&str]) -> ParsedAnswer {
    P::Items(xs.iter().map(|s| s.to_string()).collect())
}

pub fn cases() -> Vec<Case> {
    vec![
        case("Yes", G::YesNo, Ok(P::YesNo(true))),
        case("no.", G::YesNo, Ok(P::YesNo(false))),
        case("YES, they match", G::YesNo, Ok(P::YesNo(true))),
        case("Answer: No", G::YesNo, Ok(P::YesNo(false))),
        case("yes yes", G::YesNo, Ok(P::YesNo(true))),
        case("Yes or no? Yes.", G::YesNo, Err(Conflicting)),
        case("Nothing to say", G::YesNo, Err(NoMatch)),
        case("Yesterday", G::YesNo, Err(NoMatch)),
        case("", G::YesNo, Err(NoMatch)),
        case("B.", OPT, Ok(P::Option('B'))),
        case("The answer is C", OPT, Ok(P::Option('C'))),
        case("A. whole rubbing", OPT, Ok(P::Option('A'))),
        case("A or B", OPT, Err(Conflicting)),
        case("D, definitely D", OPT, Ok(P::Option('D'))),
        case("E", OPT, Err(NoMatch)),
        case("a", OPT, Err(NoMatch)),
        case("73", PCT, Ok(P::Integer(73))),
        case("Probability: 0", PCT, Ok(P::Integer(0))),
        case("100", PCT, Ok(P::Integer(100))),
        case("about 40 or 60", PCT, Err(Conflicting)),
        case("150", PCT, Err(OutOfRange)),
        case("45.5", PCT, Err(OutOfRange)),
        case("-3", PCT, Err(OutOfRange)),
        case("maybe", PCT, Err(NoMatch)),
        case("There are 7 characters.", COUNT, Ok(P::Integer(7))),
        case("7, I count 7", COUNT, Ok(P::Integer(7))),
        case("12 or 13", COUNT, Err(Conflicting)),
        case("[1, 2, 3, 4]", G::Boxes, Ok(P::Boxes(vec![[1, 2, 3, 4]]))),
        case("[0,0,10,10] and [5, 6, 7, 8]", G::Boxes, Ok(P::Boxes(vec![[0, 0, 10, 10], [5, 6, 7, 8]]))),
        case("none found: []", G::Boxes, Ok(P::Boxes(vec![]))),
        case("[1, 2, 3]", G::Boxes, Err(NoMatch)),
        case("no boxes", G::Boxes, Err(NoMatch)),
        case(r#"["SYN-0001", "SYN-0002"]"#, G::Items, Ok(items(&["SYN-0001", "SYN-0002"]))),
        case(r#"Found: ["SYN-0003"]"#, G::Items, Ok(items(&["SYN-0003"]))),
        case("[]", G::Items, Ok(items(&[]))),
        case(r#"["a"] then ["b"]"#, G::Items, Err(Conflicting)),
        case("SYN-0001", G::Items, Err(NoMatch)),
        case("anything", G::Image, Err(NotAnImage)),
    ]
}

/// Runs the table; returns one message per failing case.
pub fn failures() -> Vec<String> {
    cases()
        .into_iter()
        .filter_map(|c| {
            let got = extract_answer(c.raw, c.grammar);
            (got != c.expected).then(|| format!("{:?} under {:?}: got {got:?}, want {:?}", c.raw, c.grammar, c.expected))
        })
        .collect()
}
