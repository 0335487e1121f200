//! Exit-code partition of command outcomes.

use std::fmt;

#[derive(Clone, Debug, PartialEq)]
pub enum Failure {
    /// Bad flags or configuration.
    Usage(String),
    /// The instance violates its invariants.
    Invalid(String),
    /// A run left the divergence guard.
    Diverged(String),
    /// A guaranteed parameter region came out empty.
    EmptyRegion(String),
    /// A property audit exceeded its tolerance.
    AuditViolation(String),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Invalid(_) => 2,
            Failure::Diverged(_) => 3,
            Failure::EmptyRegion(_) => 4,
            Failure::AuditViolation(_) => 5,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (kind, msg) = match self {
            Failure::Usage(m) => ("usage", m),
            Failure::Invalid(m) => ("invalid instance", m),
            Failure::Diverged(m) => ("diverged", m),
            Failure::EmptyRegion(m) => ("empty region", m),
            Failure::AuditViolation(m) => ("audit violation", m),
        };
        write!(f, "{kind}: {msg}")
    }
}

/// Maps a core error raised during a run.
pub fn from_core(err: gimvi_core::Error) -> Failure {
    use gimvi_core::Error as E;
    match err {
        E::StepDiverged { .. } | E::Diverged { .. } => Failure::Diverged(err.to_string()),
        E::EmptyRegion(_) => Failure::EmptyRegion(err.to_string()),
        E::InvalidInstance(_) | E::NonPositiveC(_) | E::RecipeInfeasible(_) | E::ZeroBeta => {
            Failure::Invalid(err.to_string())
        }
        other => Failure::Usage(other.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn codes_partition_outcomes() {
        let codes: Vec<u8> = [
            Failure::Usage(String::new()),
            Failure::Invalid(String::new()),
            Failure::Diverged(String::new()),
            Failure::EmptyRegion(String::new()),
            Failure::AuditViolation(String::new()),
        ]
        .iter()
        .map(Failure::code)
        .collect();
        assert_eq!(codes, [1, 2, 3, 4, 5]);
    }

    #[test]
    fn divergence_maps_to_three() {
        let f = from_core(gimvi_core::Error::Diverged { k: 3, norm: 1e13 });
        assert_eq!(f.code(), 3);
        let f = from_core(gimvi_core::Error::StepDiverged { t: 1.0, norm: 1e13 });
        assert_eq!(f.code(), 3);
    }
}
