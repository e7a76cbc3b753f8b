//! Fairness auditing and training with proxy sensitive attributes.
//!
//! The crate learns proxies for unobserved binary sensitive attributes that
//! preserve group-conditional rates of downstream classifiers, transforms data
//! so that off-the-shelf fair learners can consume soft group membership, and
//! measures the resulting fairness/error tradeoff.

pub mod data;
pub mod downstream;
pub mod error;
pub mod experiment;
pub mod fairness;
pub mod learners;
pub mod online;
pub mod proxy;
pub mod rng;
pub mod transform;

pub use error::{Error, ErrorFamily, Result};

/// Neumaier-compensated sum.
pub(crate) fn compensated_sum(iter: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0_f64;
    let mut carry = 0.0_f64;
    for v in iter {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            carry += (sum - t) + v;
        } else {
            carry += (v - t) + sum;
        }
        sum = t;
    }
    sum + carry
}
