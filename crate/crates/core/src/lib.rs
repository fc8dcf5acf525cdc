//! Stochastic SIR epidemic models in a closed, homogeneously mixing community,
//! with the classical extensions that matter for applied work.
//!
//! The model: `n` individuals, `m` of them initially infectious, the rest
//! susceptible. An infectious individual stays so for a random duration `I`
//! (exponential, constant, or gamma; see [`dists`]) and, while infectious,
//! makes contacts at rate `lambda` with individuals chosen uniformly from the
//! whole community. Contacts with non-susceptibles are wasted. Infected
//! individuals become infectious (optionally after a latency period), then
//! recover and are immune. The epidemic stops when no infectious or latent
//! individuals remain.
//!
//! What the crate provides, module by module:
//!
//! * [`dists`] — infectious/latency period distributions with exact means,
//!   squared coefficients of variation and Laplace transforms.
//! * [`exact`] — the exact final-size distribution for modest `n` via a
//!   triangular linear system solved in extended precision, plus a
//!   Wald-identity consistency check.
//! * [`sim`] — event-driven exact simulation, the Sellke construction, the
//!   Reed-Frost random-graph representation, reproducible parallel Monte
//!   Carlo campaigns, and the duration-vs-log-n experiment.
//! * [`asymp`] — branching-process approximation (extinction probability,
//!   total progeny), the final-size balance equation, the central limit
//!   theorem for major outbreaks, and deterministic SIR trajectories.
//! * [`infer`] — estimation of the basic reproduction number and the
//!   critical vaccination coverage from one observed final size.
//! * [`vacc`] — vaccination arithmetic (perfect and imperfect vaccines) and
//!   simulation with leaky / all-or-nothing vaccine responses.
//! * [`multitype`] — multitype epidemics with a contact-rate matrix; the
//!   reproduction number is the Perron root of the mean offspring matrix.
//! * [`household`] — two-level mixing (households plus global contacts).
//! * [`endemic`] — SIR with demography: endemic equilibrium, quasi-stationary
//!   behaviour, and time to extinction.
//! * [`streams`] — counter-based per-replicate RNG streams so that parallel
//!   campaigns are bit-reproducible at any thread count.
//!
//! Sizes (`n`, `m`, counts) are `u64`; rates and times are `f64`. All
//! parameter structs validate on construction and operations report
//! precondition violations as [`Error`] values, never panics.

pub mod asymp;
pub mod dists;
pub mod endemic;
mod error;
pub mod exact;
pub mod household;
pub mod infer;
pub mod multitype;
mod ode;
pub mod sim;
pub mod streams;
pub mod vacc;

pub use dists::DurationDistribution;
pub use error::{Error, Result};
pub use sim::{EpidemicParams, MonteCarloSummary, OutbreakResult};
