//! Model parameters, claims and the hedger's no-arbitrage rate conditions.
//!
//! Default intensities are stored under the valuation measure Q, which is
//! where the pricing PDE lives. Physical-measure intensities are derived on
//! demand through `h^P = h^Q - r_bond + r_D`.

use std::fmt;

use num_traits::{Num, ToPrimitive};
use serde::{Deserialize, Serialize};

use crate::error::{Result, XvaError};
use crate::scalar::Scalar;

/// Every rate, volatility, credit and loss parameter of the model.
///
/// Rates are continuously compounded per year; `alpha` and the loss rates
/// are dimensionless fractions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketConfig<T> {
    pub sigma: T,
    #[serde(rename = "r_D")]
    pub r_d: T,
    pub r_f_plus: T,
    pub r_f_minus: T,
    pub r_r_plus: T,
    pub r_r_minus: T,
    pub r_c_plus: T,
    pub r_c_minus: T,
    /// Bond rate of the trader.
    #[serde(rename = "r_I")]
    pub r_bond_i: T,
    /// Bond rate of the counterparty.
    #[serde(rename = "r_C")]
    pub r_bond_c: T,
    #[serde(rename = "h_I_Q")]
    pub h_i_q: T,
    #[serde(rename = "h_C_Q")]
    pub h_c_q: T,
    #[serde(rename = "L_I")]
    pub loss_i: T,
    #[serde(rename = "L_C")]
    pub loss_c: T,
    pub alpha: T,
}

/// Parameter names as they appear in config files and `--set` overrides.
pub const PARAMETER_NAMES: [&str; 15] = [
    "sigma",
    "r_D",
    "r_f_plus",
    "r_f_minus",
    "r_r_plus",
    "r_r_minus",
    "r_c_plus",
    "r_c_minus",
    "r_I",
    "r_C",
    "h_I_Q",
    "h_C_Q",
    "L_I",
    "L_C",
    "alpha",
];

impl<T: Scalar> MarketConfig<T> {
    /// The reference parameter set of the numerical study: at-the-money
    /// call desk with 90% collateral and a 3% funding spread.
    pub fn benchmark() -> Self {
        let l = T::lit;
        Self {
            sigma: l(0.2),
            r_d: l(0.01),
            r_f_plus: l(0.05),
            r_f_minus: l(0.08),
            r_r_plus: l(0.05),
            r_r_minus: l(0.05),
            r_c_plus: l(0.01),
            r_c_minus: l(0.01),
            r_bond_i: l(0.03),
            r_bond_c: l(0.04),
            h_i_q: l(0.2),
            h_c_q: l(0.15),
            loss_i: l(0.5),
            loss_c: l(0.5),
            alpha: l(0.9),
        }
    }

    /// Every rate equal to `r_D`, no default losses: the configuration in
    /// which the nonlinear price collapses onto the benchmark price.
    pub fn symmetric(sigma: T, r_d: T, h_i_q: T, h_c_q: T, alpha: T) -> Self {
        Self {
            sigma,
            r_d,
            r_f_plus: r_d,
            r_f_minus: r_d,
            r_r_plus: r_d,
            r_r_minus: r_d,
            r_c_plus: r_d,
            r_c_minus: r_d,
            r_bond_i: r_d,
            r_bond_c: r_d,
            h_i_q,
            h_c_q,
            loss_i: T::zero(),
            loss_c: T::zero(),
            alpha,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks the field-level invariants (finite values, `sigma > 0`,
    /// nonnegative Q-intensities, loss rates and `alpha` in `[0, 1]`).
    pub fn validate(&self) -> Result<()> {
        for name in PARAMETER_NAMES {
            let v = self.get(name).expect("known name");
            if !v.is_finite() {
                return Err(invalid(name, format!("must be finite, got {v}")));
            }
        }
        if self.sigma <= T::zero() {
            return Err(invalid("sigma", format!("must be > 0, got {}", self.sigma)));
        }
        for (name, v) in [("h_I_Q", self.h_i_q), ("h_C_Q", self.h_c_q)] {
            if v < T::zero() {
                return Err(invalid(name, format!("must be >= 0, got {v}")));
            }
        }
        for (name, v) in [("L_I", self.loss_i), ("L_C", self.loss_c), ("alpha", self.alpha)] {
            if v < T::zero() || v > T::one() {
                return Err(invalid(name, format!("must lie in [0, 1], got {v}")));
            }
        }
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<T> {
        Some(match name {
            "sigma" => self.sigma,
            "r_D" => self.r_d,
            "r_f_plus" => self.r_f_plus,
            "r_f_minus" => self.r_f_minus,
            "r_r_plus" => self.r_r_plus,
            "r_r_minus" => self.r_r_minus,
            "r_c_plus" => self.r_c_plus,
            "r_c_minus" => self.r_c_minus,
            "r_I" => self.r_bond_i,
            "r_C" => self.r_bond_c,
            "h_I_Q" => self.h_i_q,
            "h_C_Q" => self.h_c_q,
            "L_I" => self.loss_i,
            "L_C" => self.loss_c,
            "alpha" => self.alpha,
            _ => return None,
        })
    }

    /// Overwrites one parameter by its config-file name. Does not
    /// re-validate; call [`MarketConfig::validate`] afterwards.
    pub fn set(&mut self, name: &str, value: T) -> Result<()> {
        let slot = match name {
            "sigma" => &mut self.sigma,
            "r_D" => &mut self.r_d,
            "r_f_plus" => &mut self.r_f_plus,
            "r_f_minus" => &mut self.r_f_minus,
            "r_r_plus" => &mut self.r_r_plus,
            "r_r_minus" => &mut self.r_r_minus,
            "r_c_plus" => &mut self.r_c_plus,
            "r_c_minus" => &mut self.r_c_minus,
            "r_I" => &mut self.r_bond_i,
            "r_C" => &mut self.r_bond_c,
            "h_I_Q" => &mut self.h_i_q,
            "h_C_Q" => &mut self.h_c_q,
            "L_I" => &mut self.loss_i,
            "L_C" => &mut self.loss_c,
            "alpha" => &mut self.alpha,
            _ => return Err(XvaError::UnknownParameter(name.to_string())),
        };
        *slot = value;
        Ok(())
    }

    /// Total default intensity `h_I^Q + h_C^Q`.
    pub fn total_intensity(&self) -> T {
        self.h_i_q + self.h_c_q
    }

    /// Physical-measure intensities; fails if either comes out negative.
    pub fn credit_p(&self) -> Result<CreditP<T>> {
        Ok(CreditP {
            h_i_p: intensity_q_to_p(self.h_i_q, self.r_bond_i, self.r_d)?,
            h_c_p: intensity_q_to_p(self.h_c_q, self.r_bond_c, self.r_d)?,
        })
    }
}

fn invalid(field: &str, reason: String) -> XvaError {
    XvaError::InvalidParameter {
        field: field.to_string(),
        reason,
    }
}

/// Default intensities under the physical measure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CreditP<T> {
    pub h_i_p: T,
    pub h_c_p: T,
}

/// `h^P = h^Q - r_bond + r_D`. A negative result is rejected.
///
/// Generic over any numeric ring so the conversion can be checked in exact
/// rational arithmetic as well as in floating point.
pub fn intensity_q_to_p<T>(h_q: T, r_bond: T, r_d: T) -> Result<T>
where
    T: Num + PartialOrd + ToPrimitive,
{
    let h_p = h_q - r_bond + r_d;
    if h_p < T::zero() {
        return Err(XvaError::NegativeIntensity {
            value: h_p.to_f64().unwrap_or(f64::NAN),
        });
    }
    Ok(h_p)
}

/// `h^Q = h^P + r_bond - r_D`.
pub fn intensity_p_to_q<T: Num>(h_p: T, r_bond: T, r_d: T) -> T {
    h_p + r_bond - r_d
}

/// One inequality of the hedger's no-arbitrage conditions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Condition {
    /// `r_r+ <= r_f+`
    RepoLendingBelowFundingLending,
    /// `r_f+ <= r_r-`
    FundingLendingBelowRepoBorrowing,
    /// `r_f+ <= r_f-`
    FundingLendingBelowBorrowing,
    /// `r_f+ v r_D < r_I + h_I^P`
    TraderBondCarry,
    /// `r_f+ v r_D < r_C + h_C^P`
    CounterpartyBondCarry,
    /// `r_c+ v r_c- <= r_f-`
    CollateralBelowFundingBorrowing,
    /// `r_f- <= (r_I + h_I^P) ^ (r_C + h_C^P)`
    FundingBorrowingBelowBondCarry,
    /// `h_I^P >= 0`
    TraderIntensityNonnegative,
    /// `h_C^P >= 0`
    CounterpartyIntensityNonnegative,
}

impl Condition {
    pub fn notation(self) -> &'static str {
        match self {
            Condition::RepoLendingBelowFundingLending => "r_r+ <= r_f+",
            Condition::FundingLendingBelowRepoBorrowing => "r_f+ <= r_r-",
            Condition::FundingLendingBelowBorrowing => "r_f+ <= r_f-",
            Condition::TraderBondCarry => "r_f+ v r_D < r_I + h_I^P",
            Condition::CounterpartyBondCarry => "r_f+ v r_D < r_C + h_C^P",
            Condition::CollateralBelowFundingBorrowing => "r_c+ v r_c- <= r_f-",
            Condition::FundingBorrowingBelowBondCarry => {
                "r_f- <= (r_I + h_I^P) ^ (r_C + h_C^P)"
            }
            Condition::TraderIntensityNonnegative => "h_I^P >= 0",
            Condition::CounterpartyIntensityNonnegative => "h_C^P >= 0",
        }
    }
}

/// A violated condition together with the two sides that failed it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Violation {
    pub condition: Condition,
    pub lhs: f64,
    pub rhs: f64,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} (lhs = {}, rhs = {})",
            self.condition.notation(),
            self.lhs,
            self.rhs
        )
    }
}

/// Lists every violated no-arbitrage inequality; an empty list means the
/// configuration is admissible. Comparisons use zero tolerance.
pub fn validate_no_arbitrage<T: Scalar>(cfg: &MarketConfig<T>) -> Vec<Violation> {
    let h_i_p = cfg.h_i_q - cfg.r_bond_i + cfg.r_d;
    let h_c_p = cfg.h_c_q - cfg.r_bond_c + cfg.r_d;
    let carry_i = cfg.r_bond_i + h_i_p;
    let carry_c = cfg.r_bond_c + h_c_p;
    let lend_floor = cfg.r_f_plus.max(cfg.r_d);
    let collateral = cfg.r_c_plus.max(cfg.r_c_minus);

    let checks = [
        (
            Condition::RepoLendingBelowFundingLending,
            cfg.r_r_plus <= cfg.r_f_plus,
            cfg.r_r_plus,
            cfg.r_f_plus,
        ),
        (
            Condition::FundingLendingBelowRepoBorrowing,
            cfg.r_f_plus <= cfg.r_r_minus,
            cfg.r_f_plus,
            cfg.r_r_minus,
        ),
        (
            Condition::FundingLendingBelowBorrowing,
            cfg.r_f_plus <= cfg.r_f_minus,
            cfg.r_f_plus,
            cfg.r_f_minus,
        ),
        (Condition::TraderBondCarry, lend_floor < carry_i, lend_floor, carry_i),
        (
            Condition::CounterpartyBondCarry,
            lend_floor < carry_c,
            lend_floor,
            carry_c,
        ),
        (
            Condition::CollateralBelowFundingBorrowing,
            collateral <= cfg.r_f_minus,
            collateral,
            cfg.r_f_minus,
        ),
        (
            Condition::FundingBorrowingBelowBondCarry,
            cfg.r_f_minus <= carry_i.min(carry_c),
            cfg.r_f_minus,
            carry_i.min(carry_c),
        ),
        (
            Condition::TraderIntensityNonnegative,
            h_i_p >= T::zero(),
            h_i_p,
            T::zero(),
        ),
        (
            Condition::CounterpartyIntensityNonnegative,
            h_c_p >= T::zero(),
            h_c_p,
            T::zero(),
        ),
    ];

    checks
        .into_iter()
        .filter(|(_, ok, _, _)| !ok)
        .map(|(condition, _, lhs, rhs)| Violation {
            condition,
            lhs: lhs.as_f64(),
            rhs: rhs.as_f64(),
        })
        .collect()
}

/// Payoff profile of a European claim.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Payoff<T> {
    Call,
    Put,
    /// Piecewise-linear in the spot, linearly extrapolated past the outer
    /// knots (constant if there is a single knot).
    Custom { knots: Vec<(T, T)> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClaimSpec<T> {
    pub payoff: Payoff<T>,
    pub strike: T,
    pub maturity: T,
}

impl<T: Scalar> ClaimSpec<T> {
    pub fn call(strike: T, maturity: T) -> Result<Self> {
        Self::new(Payoff::Call, strike, maturity)
    }

    pub fn put(strike: T, maturity: T) -> Result<Self> {
        Self::new(Payoff::Put, strike, maturity)
    }

    /// Piecewise-linear payoff through `knots` (spot, value). `strike`
    /// only positions the grid for custom payoffs.
    pub fn custom(knots: Vec<(T, T)>, strike: T, maturity: T) -> Result<Self> {
        Self::new(Payoff::Custom { knots }, strike, maturity)
    }

    /// The zero claim.
    pub fn zero(strike: T, maturity: T) -> Result<Self> {
        Self::custom(vec![(strike, T::zero())], strike, maturity)
    }

    pub fn new(payoff: Payoff<T>, strike: T, maturity: T) -> Result<Self> {
        let claim = Self {
            payoff,
            strike,
            maturity,
        };
        claim.validate()?;
        Ok(claim)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.strike.is_finite() && self.strike > T::zero()) {
            return Err(XvaError::InvalidClaim(format!(
                "strike must be finite and > 0, got {}",
                self.strike
            )));
        }
        if !(self.maturity.is_finite() && self.maturity > T::zero()) {
            return Err(XvaError::InvalidClaim(format!(
                "maturity must be finite and > 0, got {}",
                self.maturity
            )));
        }
        if let Payoff::Custom { knots } = &self.payoff {
            if knots.is_empty() {
                return Err(XvaError::InvalidClaim("custom payoff needs at least one knot".into()));
            }
            if knots.iter().any(|(s, v)| !s.is_finite() || !v.is_finite() || *s < T::zero()) {
                return Err(XvaError::InvalidClaim(
                    "knots must be finite with nonnegative spot".into(),
                ));
            }
            if knots.windows(2).any(|w| w[1].0 <= w[0].0) {
                return Err(XvaError::InvalidClaim(
                    "knot spots must be strictly increasing".into(),
                ));
            }
        }
        Ok(())
    }

    /// Terminal payoff at spot `s`.
    pub fn payoff(&self, s: T) -> T {
        match &self.payoff {
            Payoff::Call => (s - self.strike).pos(),
            Payoff::Put => (self.strike - s).pos(),
            Payoff::Custom { knots } => piecewise_linear(knots, s),
        }
    }
}

fn piecewise_linear<T: Scalar>(knots: &[(T, T)], s: T) -> T {
    if knots.len() == 1 {
        return knots[0].1;
    }
    let seg = match knots.iter().position(|&(k, _)| k > s) {
        Some(0) => 0,
        Some(i) => i - 1,
        None => knots.len() - 2,
    };
    let (s0, v0) = knots[seg];
    let (s1, v1) = knots[seg + 1];
    v0 + (v1 - v0) * (s - s0) / (s1 - s0)
}
