//! Entropy-anchored error head: construction from the classifier head,
//! the three-term objective with its analytic gradient, training, grid
//! search and ablation variants.

mod grid;
mod head;
mod io;
mod labels;
mod train;

pub use grid::{
    compare_candidates, grid_search, AlienGrid, GridEvaluation, GridOutcome, GridPoint,
};
pub use head::{
    alien_grad, alien_loss, init_alien, score_alien, AlienHead, HeadGradient, LossBreakdown,
    BCE_CLAMP,
};
pub use io::{read_alien, write_alien, AlienManifest, ALIEN_MANIFEST};
pub use labels::ErrorLabels;
pub use train::{
    fit_alien, fit_alien_on, AblationVariant, AlienModel, FittedAlien, TrainConfig, TrainingSet,
    RAND_CLS_INIT_STD,
};
