//! Model construction: turning instances and scenario trees into
//! constraint systems under three model forms (deterministic, two-stage,
//! multi-stage) and three revenue encodings (deferred tangent cuts, lifted
//! reciprocal, bit expansion), plus size accounting and LP export.

pub mod build;
pub mod reform;
pub mod size;
pub mod system;

pub use build::{build_det, build_ms, build_ts, BuildOptions, MsForm, TsForm};
pub use size::{size_report, SizeReport};
pub use system::{
    add_soc_rows, AffExpr, ConstraintSystem, DecisionCtx, Dims, LazyRevenue, LinRow, ModelForm,
    Objective, Reform, RevenueCtx, Sense, SocRow, SystemLayout, VarDef, VarId, VarKind, VarTag,
};
