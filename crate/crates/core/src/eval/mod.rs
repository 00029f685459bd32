//! Evaluation, the ablation grid and figures.

pub mod ablation;
pub mod evaluate;
pub mod figures;

pub use ablation::{ablation_grid, run_ablation, AblationRow, AblationSpec, AblationTable, ABLATION_CSV};
pub use evaluate::{
    evaluate, evaluate_checkpoint, EvalOptions, GeneratorTranslator, IdentityTranslator, Provenance, Translator,
};
pub use figures::{render_error_heatmap, render_feature_panels, HeatmapScale};
