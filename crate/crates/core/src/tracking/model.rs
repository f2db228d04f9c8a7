use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::conjugate::BetaAB;
use crate::covariance::cholesky_lower;
use crate::rng::StreamRng;
use crate::special::{expit, ln_choose, ln_normal_pdf, logit, softplus};
use crate::{Error, Result};

/// A Markov state-space model `theta_t | theta_{t-1}`, `y_t | theta_t`.
pub trait StateSpaceModel: Send + Sync {
    type State: Clone + Send + Sync;
    type Obs: ?Sized + Sync;

    fn dimension(&self) -> usize;

    /// Draw from the initial distribution of the state.
    fn sample_initial(&self, rng: &mut StreamRng) -> Self::State;

    /// Draw `theta_t` given `theta_{t-1}` in place.
    fn propagate(&self, state: &mut Self::State, rng: &mut StreamRng);

    /// `ln p(y | theta)`.
    fn log_obs(&self, state: &Self::State, y: &Self::Obs) -> f64;

    fn validate_obs(&self, _y: &Self::Obs) -> Result<()> {
        Ok(())
    }
}

#[inline]
fn std_normal(rng: &mut StreamRng) -> f64 {
    StandardNormal.sample(rng)
}

/// Gaussian random walk observed with Gaussian noise.
#[derive(Clone, Debug)]
pub struct GaussianRandomWalk {
    pub state_sd: f64,
    pub obs_sd: f64,
    pub init_mean: f64,
    pub init_sd: f64,
    obs_var: f64,
}

impl GaussianRandomWalk {
    pub fn new(state_sd: f64, obs_sd: f64, init_mean: f64, init_sd: f64) -> Result<Self> {
        if !(state_sd >= 0.0 && obs_sd > 0.0 && init_sd >= 0.0) {
            return Err(Error::domain("random walk needs obs_sd > 0 and nonnegative state/init sd"));
        }
        Ok(Self {
            state_sd,
            obs_sd,
            init_mean,
            init_sd,
            obs_var: obs_sd * obs_sd,
        })
    }
}

impl StateSpaceModel for GaussianRandomWalk {
    type State = f64;
    type Obs = f64;

    fn dimension(&self) -> usize {
        1
    }

    fn sample_initial(&self, rng: &mut StreamRng) -> f64 {
        self.init_mean + self.init_sd * std_normal(rng)
    }

    #[inline]
    fn propagate(&self, state: &mut f64, rng: &mut StreamRng) {
        *state += self.state_sd * std_normal(rng);
    }

    #[inline]
    fn log_obs(&self, state: &f64, y: &f64) -> f64 {
        ln_normal_pdf(*y, *state, self.obs_var)
    }

    fn validate_obs(&self, y: &f64) -> Result<()> {
        if y.is_finite() {
            Ok(())
        } else {
            Err(Error::domain(format!("observation must be finite, got {y}")))
        }
    }
}

/// Gaussian drift with occasional jumps of fixed size.
#[derive(Clone, Debug)]
pub struct DriftJumpWalk {
    pub jump_prob: f64,
    pub jump: f64,
    pub walk: GaussianRandomWalk,
}

impl DriftJumpWalk {
    pub fn new(jump_prob: f64, jump: f64, walk: GaussianRandomWalk) -> Result<Self> {
        if !(0.0..=1.0).contains(&jump_prob) {
            return Err(Error::domain(format!("jump probability must lie in [0,1], got {jump_prob}")));
        }
        Ok(Self { jump_prob, jump, walk })
    }
}

impl StateSpaceModel for DriftJumpWalk {
    type State = f64;
    type Obs = f64;

    fn dimension(&self) -> usize {
        1
    }

    fn sample_initial(&self, rng: &mut StreamRng) -> f64 {
        self.walk.sample_initial(rng)
    }

    fn propagate(&self, state: &mut f64, rng: &mut StreamRng) {
        let u: f64 = rng.random();
        if u < self.jump_prob {
            *state += self.jump;
        }
        self.walk.propagate(state, rng);
    }

    fn log_obs(&self, state: &f64, y: &f64) -> f64 {
        self.walk.log_obs(state, y)
    }

    fn validate_obs(&self, y: &f64) -> Result<()> {
        self.walk.validate_obs(y)
    }
}

/// Initial distribution of a defect probability, tracked on the logit scale.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LogitInit {
    /// Draw the probability from a Beta and transform.
    Beta(BetaAB),
    /// Draw the logit directly from a Normal.
    Normal { mean: f64, sd: f64 },
}

/// Random walk on the logit of a Binomial success probability.
#[derive(Clone, Debug)]
pub struct LogitBinomialWalk {
    pub batch_size: u64,
    pub state_sd: f64,
    pub init: LogitInit,
    ln_choose: Vec<f64>,
}

impl LogitBinomialWalk {
    pub fn new(batch_size: u64, state_sd: f64, init: LogitInit) -> Result<Self> {
        if batch_size == 0 || !(state_sd >= 0.0) {
            return Err(Error::domain("logit walk needs a positive batch size and nonnegative sd"));
        }
        let ln_choose = (0..=batch_size).map(|k| ln_choose(batch_size, k)).collect();
        Ok(Self {
            batch_size,
            state_sd,
            init,
            ln_choose,
        })
    }

    /// Probability represented by a logit state.
    pub fn probability(z: f64) -> f64 {
        expit(z)
    }
}

impl StateSpaceModel for LogitBinomialWalk {
    type State = f64;
    type Obs = u64;

    fn dimension(&self) -> usize {
        1
    }

    fn sample_initial(&self, rng: &mut StreamRng) -> f64 {
        match self.init {
            LogitInit::Beta(b) => {
                let p: f64 = rand_distr::Beta::new(b.a, b.b)
                    .expect("validated beta parameters")
                    .sample(rng);
                // keep the logit finite if the draw hits the boundary
                logit(p.clamp(1e-300, 1.0 - f64::EPSILON))
            }
            LogitInit::Normal { mean, sd } => mean + sd * std_normal(rng),
        }
    }

    #[inline]
    fn propagate(&self, state: &mut f64, rng: &mut StreamRng) {
        *state += self.state_sd * std_normal(rng);
    }

    // y ln(p) + (N - y) ln(1 - p) = y z - N ln(1 + e^z)
    #[inline]
    fn log_obs(&self, z: &f64, y: &u64) -> f64 {
        self.ln_choose[*y as usize] + *y as f64 * *z - self.batch_size as f64 * softplus(*z)
    }

    fn validate_obs(&self, y: &u64) -> Result<()> {
        if *y <= self.batch_size {
            Ok(())
        } else {
            Err(Error::domain(format!("count {y} exceeds batch size {}", self.batch_size)))
        }
    }
}

/// Multivariate Gaussian random walk,
/// `theta_t ~ N(theta_{t-1}, Q)`, `y_t ~ N(theta_t, R)`, `theta_0 ~ N(m0, S0)`.
#[derive(Clone, Debug)]
pub struct MultivariateGaussianWalk {
    dim: usize,
    init_mean: Vec<f64>,
    init_chol: DMatrix<f64>,
    transition_chol: DMatrix<f64>,
    obs_chol: DMatrix<f64>,
    obs_log_norm: f64,
}

impl MultivariateGaussianWalk {
    pub fn new(
        init_mean: Vec<f64>,
        init_cov: &DMatrix<f64>,
        transition_cov: &DMatrix<f64>,
        obs_cov: &DMatrix<f64>,
    ) -> Result<Self> {
        let dim = init_mean.len();
        for m in [init_cov, transition_cov, obs_cov] {
            if m.nrows() != dim || m.ncols() != dim {
                return Err(Error::Dimension {
                    expected: dim,
                    got: m.nrows(),
                });
            }
        }
        let obs_chol = cholesky_lower(obs_cov)?;
        let log_det: f64 = obs_chol.diagonal().iter().map(|d| 2.0 * d.ln()).sum();
        Ok(Self {
            dim,
            init_mean,
            init_chol: cholesky_lower(init_cov)?,
            transition_chol: cholesky_lower(transition_cov)?,
            obs_log_norm: -0.5 * (dim as f64 * (2.0 * std::f64::consts::PI).ln() + log_det),
            obs_chol,
        })
    }

    fn add_correlated_noise(&self, chol: &DMatrix<f64>, x: &mut [f64], rng: &mut StreamRng) {
        let d = self.dim;
        let z: Vec<f64> = (0..d).map(|_| std_normal(rng)).collect();
        for i in 0..d {
            let mut acc = 0.0;
            for (j, zj) in z.iter().enumerate().take(i + 1) {
                acc += chol[(i, j)] * zj;
            }
            x[i] += acc;
        }
    }
}

impl StateSpaceModel for MultivariateGaussianWalk {
    type State = Vec<f64>;
    type Obs = [f64];

    fn dimension(&self) -> usize {
        self.dim
    }

    fn sample_initial(&self, rng: &mut StreamRng) -> Vec<f64> {
        let mut x = self.init_mean.clone();
        self.add_correlated_noise(&self.init_chol, &mut x, rng);
        x
    }

    fn propagate(&self, state: &mut Vec<f64>, rng: &mut StreamRng) {
        self.add_correlated_noise(&self.transition_chol, state, rng);
    }

    fn log_obs(&self, state: &Vec<f64>, y: &[f64]) -> f64 {
        // forward substitution L u = y - theta; quadratic form is |u|^2
        let d = self.dim;
        let mut u = [0.0f64; 32];
        let mut heap;
        let u: &mut [f64] = if d <= 32 {
            &mut u[..d]
        } else {
            heap = vec![0.0; d];
            &mut heap
        };
        let mut q = 0.0;
        for i in 0..d {
            let mut r = y[i] - state[i];
            for j in 0..i {
                r -= self.obs_chol[(i, j)] * u[j];
            }
            u[i] = r / self.obs_chol[(i, i)];
            q += u[i] * u[i];
        }
        self.obs_log_norm - 0.5 * q
    }

    fn validate_obs(&self, y: &[f64]) -> Result<()> {
        if y.len() != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                got: y.len(),
            });
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("observation vector has non-finite entries"));
        }
        Ok(())
    }
}

impl MultivariateGaussianWalk {
    /// Lower Cholesky factor of the observation covariance.
    pub fn obs_chol(&self) -> &DMatrix<f64> {
        &self.obs_chol
    }

    pub fn init_mean(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.init_mean)
    }
}
