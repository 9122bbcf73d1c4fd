//! Minimax prediction from ensemble votes, with and without abstention,
//! plus PAC-Bayes estimates of the correlation constraint.
//!
//! [`model`] holds the shared types. [`game`] and [`abstain`] solve the two
//! games in closed form, [`pac_bayes`] turns training data into a
//! correlation bound, and [`oracle`] certifies the closed forms with
//! independent solvers.

pub mod abstain;
pub mod error;
pub mod game;
pub mod model;
pub mod numeric;
pub mod oracle;
pub mod pac_bayes;

pub use abstain::{AbstainBenefit, AbstainRegime, AbstainSolution, AbstainValue};
pub use error::{Error, Result};
pub use game::GameSolution;
pub use model::{
    compute_votes, payoff, sort_profile, AbstainStrategy, EnsembleMatrix, LabelVector,
    LabeledSample, PredictionVector, VoteProfile, WeightRole, WeightVector,
};
pub use oracle::{BatchCertification, BoxLpProblem, CertificationReport, Instance};
pub use pac_bayes::{BoundReport, PacBayesParams};
