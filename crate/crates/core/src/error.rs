use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}` = {value}: {constraint}")]
    InvalidParam { name: &'static str, value: String, constraint: &'static str },
    #[error("collision state {state:?} is inconsistent with N={stations}, C={slots}")]
    InconsistentState { state: Vec<u32>, stations: usize, slots: usize },
    #[error("states {from:?} and {to:?} have different colliding-station counts")]
    BlockMismatch { from: Vec<u32>, to: Vec<u32> },
    #[error("state space too large: N={0} exceeds the enumeration guard")]
    StateSpaceTooLarge(usize),
    #[error("combinatorial count overflowed")]
    Overflow,
    #[error("singular linear system")]
    Singular,
    #[error("{0} is undefined for this input")]
    Undefined(&'static str),
    #[error("schedule-length table has no entry for C={0}")]
    MissingTableEntry(usize),
    #[error("i/o: {0}")]
    Io(String),
    #[error("parse: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<V: std::fmt::Display>(name: &'static str, value: V, constraint: &'static str) -> Error {
    Error::InvalidParam { name, value: value.to_string(), constraint }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
