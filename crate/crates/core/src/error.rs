use thiserror::Error;

use crate::setfn::Witness;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{what}: size {size} exceeds cap {cap}")]
    SizeCap {
        what: &'static str,
        size: usize,
        cap: usize,
    },
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("B_t(M) is empty: packing number nu = {nu} is below 1/t = {inv_t}")]
    Infeasible { nu: String, inv_t: String },
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("instance is not invariant under the group: {0}")]
    NotInvariant(Witness),
    #[error("feasibility is not strongly symmetric: {0}")]
    NotStronglySymmetric(Witness),
    #[error("linear program is unbounded")]
    Unbounded,
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub(crate) fn check_size(what: &'static str, size: usize, cap: usize) -> Result<()> {
        if size > cap {
            Err(Error::SizeCap { what, size, cap })
        } else {
            Ok(())
        }
    }
}
