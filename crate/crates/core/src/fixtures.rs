//! Bundled example networks and coefficient files.

use crate::error::{Error, Result};
use crate::galois::Field;
use crate::netmodel::{LecAssignment, NetworkSpec};

pub const FIG2: &str = include_str!("../fixtures/v1/fig2.json");
pub const EX2: &str = include_str!("../fixtures/v1/ex2.json");
pub const EX2_LECS: &str = include_str!("../fixtures/v1/ex2-lecs.json");
pub const EX3: &str = include_str!("../fixtures/v1/ex3.json");
pub const EX4: &str = include_str!("../fixtures/v1/ex4.json");
pub const EX4_LECS: &str = include_str!("../fixtures/v1/ex4-lecs.json");
pub const ONOFF5: &str = include_str!("../fixtures/v1/onoff5.json");
pub const ONOFF5_CANCEL: &str = include_str!("../fixtures/v1/onoff5-cancel.json");
pub const ONOFF6: &str = include_str!("../fixtures/v1/onoff6.json");
pub const ONOFF6_CANCEL: &str = include_str!("../fixtures/v1/onoff6-cancel.json");

pub const NAMES: [&str; 6] = ["fig2", "ex2", "ex3", "ex4", "onoff5", "onoff6"];

fn text(name: &str) -> Result<&'static str> {
    Ok(match name {
        "fig2" => FIG2,
        "ex2" => EX2,
        "ex3" => EX3,
        "ex4" => EX4,
        "onoff5" => ONOFF5,
        "onoff6" => ONOFF6,
        other => return Err(Error::Params(format!("unknown fixture {other:?}"))),
    })
}

pub fn network(name: &str) -> Result<NetworkSpec> {
    NetworkSpec::from_json(text(name)?, None)
}

/// The published coefficient values for a fixture, where there are any.
pub fn lecs(name: &str, field: &Field) -> Result<LecAssignment> {
    match name {
        "ex2" => LecAssignment::from_json(EX2_LECS, field),
        "ex4" => LecAssignment::from_json(EX4_LECS, field),
        other => Err(Error::Params(format!("fixture {other:?} has no coefficient file"))),
    }
}
