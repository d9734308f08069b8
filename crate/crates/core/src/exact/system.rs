use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{AffineGaussianKernel, Categorical, CategoricalKernel, GaussianDensity};

/// Linear-Gaussian state-space model on `0..=T`.
///
/// `transitions[t - 1]` maps `x_{t-1}` to `x_t`; `observations[t]` maps `x_t` to `y_t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearGaussianSystem {
    pub init: GaussianDensity,
    pub transitions: Vec<AffineGaussianKernel>,
    pub observations: Vec<AffineGaussianKernel>,
}

impl LinearGaussianSystem {
    pub fn new(
        init: GaussianDensity,
        transitions: Vec<AffineGaussianKernel>,
        observations: Vec<AffineGaussianKernel>,
    ) -> Result<Self> {
        let sys = Self {
            init,
            transitions,
            observations,
        };
        sys.validate()?;
        Ok(sys)
    }

    /// Time-invariant system with horizon `horizon`.
    pub fn stationary(
        init: GaussianDensity,
        transition: AffineGaussianKernel,
        observation: AffineGaussianKernel,
        horizon: usize,
    ) -> Result<Self> {
        Self::new(
            init,
            vec![transition; horizon],
            vec![observation; horizon + 1],
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.observations.len() != self.transitions.len() + 1 {
            return Err(Error::invalid(
                "linear system",
                format!(
                    "{} transitions need {} observation kernels, got {}",
                    self.transitions.len(),
                    self.transitions.len() + 1,
                    self.observations.len()
                ),
            ));
        }
        let d = self.init.dim();
        for k in &self.transitions {
            if k.dim_in() != d || k.dim_out() != d {
                return Err(Error::Dimension {
                    context: "transition kernel",
                    expected: d,
                    got: if k.dim_in() != d {
                        k.dim_in()
                    } else {
                        k.dim_out()
                    },
                });
            }
        }
        let dy = self.observations[0].dim_out();
        for k in &self.observations {
            if k.dim_in() != d {
                return Err(Error::Dimension {
                    context: "observation kernel input",
                    expected: d,
                    got: k.dim_in(),
                });
            }
            if k.dim_out() != dy {
                return Err(Error::Dimension {
                    context: "observation kernel output",
                    expected: dy,
                    got: k.dim_out(),
                });
            }
        }
        Ok(())
    }

    pub fn horizon(&self) -> usize {
        self.transitions.len()
    }

    pub fn state_dim(&self) -> usize {
        self.init.dim()
    }

    pub fn obs_dim(&self) -> usize {
        self.observations[0].dim_out()
    }

    pub fn check_observations(&self, y: &[DVector<f64>]) -> Result<()> {
        check_observations(y, self.horizon(), self.obs_dim())
    }
}

/// Jump Gauss–Markov system driven by a finite Markov chain.
///
/// The state kernel is selected by the regime at the *source* time
/// (`x_t | x_{t-1} ~ state_kernels[z_{t-1}]`) and the observation kernel by
/// the regime at the current time (`y_t | x_t ~ obs_kernels[z_t]`).
/// Kernels are time-invariant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpGMSystem {
    pub chain_init: Categorical,
    pub chain_kernel: CategoricalKernel,
    pub state_init: Vec<GaussianDensity>,
    pub state_kernels: Vec<AffineGaussianKernel>,
    pub obs_kernels: Vec<AffineGaussianKernel>,
    pub horizon: usize,
}

impl JumpGMSystem {
    pub fn new(
        chain_init: Categorical,
        chain_kernel: CategoricalKernel,
        state_init: Vec<GaussianDensity>,
        state_kernels: Vec<AffineGaussianKernel>,
        obs_kernels: Vec<AffineGaussianKernel>,
        horizon: usize,
    ) -> Result<Self> {
        let sys = Self {
            chain_init,
            chain_kernel,
            state_init,
            state_kernels,
            obs_kernels,
            horizon,
        };
        sys.validate()?;
        Ok(sys)
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.chain_init.len();
        for (context, got) in [
            ("chain kernel", self.chain_kernel.size()),
            ("state_init", self.state_init.len()),
            ("state_kernels", self.state_kernels.len()),
            ("obs_kernels", self.obs_kernels.len()),
        ] {
            if got != m {
                return Err(Error::Dimension {
                    context,
                    expected: m,
                    got,
                });
            }
        }
        let d = self.state_init[0].dim();
        let dy = self.obs_kernels[0].dim_out();
        for z in 0..m {
            let (g, k, h) = (
                &self.state_init[z],
                &self.state_kernels[z],
                &self.obs_kernels[z],
            );
            if g.dim() != d || k.dim_in() != d || k.dim_out() != d || h.dim_in() != d {
                return Err(Error::invalid(
                    "jump system",
                    format!("regime {z} has inconsistent state dimension"),
                ));
            }
            if h.dim_out() != dy {
                return Err(Error::invalid(
                    "jump system",
                    format!("regime {z} has inconsistent observation dimension"),
                ));
            }
        }
        Ok(())
    }

    pub fn num_regimes(&self) -> usize {
        self.chain_init.len()
    }

    pub fn state_dim(&self) -> usize {
        self.state_init[0].dim()
    }

    pub fn obs_dim(&self) -> usize {
        self.obs_kernels[0].dim_out()
    }

    pub fn check_observations(&self, y: &[DVector<f64>]) -> Result<()> {
        check_observations(y, self.horizon, self.obs_dim())
    }

    /// Same system with a different horizon.
    pub fn with_horizon(&self, horizon: usize) -> Self {
        Self {
            horizon,
            ..self.clone()
        }
    }

    /// The linear-Gaussian system obtained by fixing the regime path.
    pub fn along_path(&self, z: &[usize]) -> Result<LinearGaussianSystem> {
        if z.len() != self.horizon + 1 {
            return Err(Error::Dimension {
                context: "regime path",
                expected: self.horizon + 1,
                got: z.len(),
            });
        }
        if let Some(&bad) = z.iter().find(|&&r| r >= self.num_regimes()) {
            return Err(Error::invalid(
                "regime path",
                format!("regime {bad} out of range"),
            ));
        }
        LinearGaussianSystem::new(
            self.state_init[z[0]].clone(),
            z[..self.horizon]
                .iter()
                .map(|&r| self.state_kernels[r].clone())
                .collect(),
            z.iter().map(|&r| self.obs_kernels[r].clone()).collect(),
        )
    }
}

fn check_observations(y: &[DVector<f64>], horizon: usize, dy: usize) -> Result<()> {
    if y.len() != horizon + 1 {
        return Err(Error::Dimension {
            context: "observation sequence length",
            expected: horizon + 1,
            got: y.len(),
        });
    }
    for (t, yt) in y.iter().enumerate() {
        if yt.len() != dy {
            return Err(Error::Dimension {
                context: "observation dimension",
                expected: dy,
                got: yt.len(),
            }
            .at(t));
        }
        if yt.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("observation", "non-finite entry").at(t));
        }
    }
    Ok(())
}
