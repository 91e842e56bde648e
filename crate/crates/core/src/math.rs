// Thin aliases so call sites read like ordinary float code without std.
pub(crate) use libm::{exp, expm1, floor, lgamma as ln_gamma, log, log1p};

pub(crate) const NEG_INF: f64 = f64::NEG_INFINITY;
