mod record;
mod score;

pub use record::{EvalPoint, RunRecord, RunStatus};
pub use score::{
    absence_impact, auc, component_impact, difficulty, difficulty_rank, impact_report, improvement, mean_curve,
    normalize_signed, record_auc, sei, AucTable, Impact, SettingReport,
};
