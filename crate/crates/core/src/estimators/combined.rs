//! Confidence-consistency combinations.

/// Multiplicative CoCoA: u_info · u_cons.
pub fn cocoa(u_info: f64, u_cons: f64) -> f64 {
    u_info * u_cons
}

pub fn additive_cocoa(u_info: f64, u_cons: f64) -> f64 {
    u_info + u_cons
}

/// u_info scaled by the DegMat value of the whole sample set.
pub fn full_sample_cocoa(u_info: f64, deg_mat: f64) -> f64 {
    u_info * deg_mat
}

/// (1 − exp(−u_info)) · u_cons: the base score mapped back to a probability
/// of being wrong before combining.
pub fn prob_cocoa(u_info: f64, u_cons: f64) -> f64 {
    -(-u_info).exp_m1() * u_cons
}
