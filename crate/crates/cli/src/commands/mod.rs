pub mod bench;
pub mod kernel_sgd;
pub mod potentials;
pub mod theorem1;

/// Outcome of a check command.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    /// A certified inequality failed numerically.
    Fail,
}

pub fn mark(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}
