//! Asymmetric account rates and the nonlinear drivers of the replication
//! BSDEs.
//!
//! The drivers are expressed in currency per year. `z` is the dollar
//! diffusion exposure `xi * sigma * S`, so the repo term carries an explicit
//! `1/sigma`. `z_i`/`z_c` are the jumps of the wealth at the trader's and
//! the counterparty's default.

use serde::{Deserialize, Serialize};

use crate::model::MarketConfig;
use crate::scalar::Scalar;

/// Which replication problem is being solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    /// Hedging a sold claim (upper no-arbitrage price).
    Seller,
    /// Hedging a purchased claim (lower no-arbitrage price).
    Buyer,
}

impl Side {
    pub fn as_str(self) -> &'static str {
        match self {
            Side::Seller => "seller",
            Side::Buyer => "buyer",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriverInputs<T> {
    pub v: T,
    pub z: T,
    pub z_i: T,
    pub z_c: T,
    pub v_hat: T,
}

impl<T: Scalar> DriverInputs<T> {
    pub fn new(v: T, z: T, z_i: T, z_c: T, v_hat: T) -> Self {
        Self {
            v,
            z,
            z_i,
            z_c,
            v_hat,
        }
    }

    fn negated(self) -> Self {
        Self {
            v: -self.v,
            z: -self.z,
            z_i: -self.z_i,
            z_c: -self.z_c,
            v_hat: -self.v_hat,
        }
    }
}

fn indicator_rate<T: Scalar>(x: T, below: T, above: T) -> T {
    if x < T::zero() {
        below
    } else if x > T::zero() {
        above
    } else {
        T::zero()
    }
}

impl<T: Scalar> MarketConfig<T> {
    /// Repo rate on a security-account position `x`.
    pub fn rate_repo(&self, x: T) -> T {
        indicator_rate(x, self.r_r_minus, self.r_r_plus)
    }

    /// Treasury rate on a funding-account position `y`.
    pub fn rate_fund(&self, y: T) -> T {
        indicator_rate(y, self.r_f_minus, self.r_f_plus)
    }

    /// Collateral rate on a collateral amount `x`.
    pub fn rate_coll(&self, x: T) -> T {
        indicator_rate(x, self.r_c_minus, self.r_c_plus)
    }
}

/// Seller's driver `f+`.
pub fn f_seller<T: Scalar>(inputs: DriverInputs<T>, cfg: &MarketConfig<T>) -> T {
    let DriverInputs {
        v,
        z,
        z_i,
        z_c,
        v_hat,
    } = inputs;
    let collateral = cfg.alpha * v_hat;
    let funding = v + z_i + z_c - collateral;
    let carry = cfg.r_f_plus * funding.pos() - cfg.r_f_minus * funding.neg_part()
        + (cfg.r_d - cfg.r_r_minus) * z.pos() / cfg.sigma
        - (cfg.r_d - cfg.r_r_plus) * z.neg_part() / cfg.sigma
        - cfg.r_d * z_i
        - cfg.r_d * z_c
        + cfg.r_c_plus * collateral.pos()
        - cfg.r_c_minus * collateral.neg_part();
    -carry
}

/// Buyer's driver `f-(v, z, z_i, z_c; v_hat) = -f+(-v, -z, -z_i, -z_c; -v_hat)`.
pub fn f_buyer<T: Scalar>(inputs: DriverInputs<T>, cfg: &MarketConfig<T>) -> T {
    -f_seller(inputs.negated(), cfg)
}

pub fn driver<T: Scalar>(side: Side, inputs: DriverInputs<T>, cfg: &MarketConfig<T>) -> T {
    match side {
        Side::Seller => f_seller(inputs, cfg),
        Side::Buyer => f_buyer(inputs, cfg),
    }
}
