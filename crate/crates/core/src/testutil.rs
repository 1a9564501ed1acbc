use crate::instance::{parse_instance, Instance};

/// Two jobs on two machines. J1: O11 {m1:2, m2:3}, O12 {m2:1}; J2: O21 {m1:1, m2:2}.
pub const TOY1_TEXT: &str = "2 2 1.67\n2  2 1 2 2 3  1 2 1\n1  2 1 1 2 2\n#priorities\n2 1\n";

pub fn toy1() -> Instance {
    parse_instance(TOY1_TEXT).unwrap()
}
