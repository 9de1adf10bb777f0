//! Shared fixtures for the criterion benchmarks.

use dmtomo::modular::{Method1Config, Method1Mode};
use dmtomo::sequential::{GaussianPointerConfig, Method2Config};
use dmtomo::states::{bell_phi_plus, RealizedState};
use dmtomo::Bprime;

pub fn bell_state() -> RealizedState {
    RealizedState::from_pure(bell_phi_plus())
}

pub fn werner_state() -> RealizedState {
    RealizedState::from_mixed(dmtomo::states::werner(0.7).unwrap())
}

pub fn method1_exact() -> Method1Config {
    Method1Config::exact()
}

pub fn method1_probability(eta: f64) -> Method1Config {
    Method1Config {
        mode: Method1Mode::Probability,
        eta,
        ..Method1Config::exact()
    }
}

pub fn method2(g: f64) -> Method2Config {
    Method2Config {
        pointer: GaussianPointerConfig { g, sigma: 1.0 },
        middle: Bprime::DD,
    }
}
