pub mod answer_cases;
pub mod oracles;
pub mod scenario;
