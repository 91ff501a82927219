//! Named processes and their published values.

use clap::ValueEnum;
use proctensor::process::{build_common_cause, ProcessTensor};
use proctensor::recovery::{reference, NoiseModel};
use proctensor::states::{lambda_state, omega_state, DensityMatrix};
use proctensor::ComplexMatrix;
use serde::Serialize;

use crate::report::{experiment, theory, Reference};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ProcessName {
    #[value(alias = "process1")]
    Lambda,
    #[value(alias = "process2")]
    Omega,
}

impl ProcessName {
    pub fn state(self) -> DensityMatrix {
        match self {
            Self::Lambda => lambda_state(),
            Self::Omega => omega_state(),
        }
    }

    pub fn input_dims(self) -> [usize; 3] {
        match self {
            Self::Lambda => [2, 2, 2],
            Self::Omega => [2, 3, 2],
        }
    }

    pub fn output_dims(self) -> (usize, usize) {
        let d = self.input_dims();
        (d[0], d[1])
    }

    pub fn tensor(self) -> anyhow::Result<ProcessTensor> {
        Ok(build_common_cause(&self.state(), self.input_dims(), self.output_dims())?)
    }

    pub fn build_from(self, gamma: &DensityMatrix) -> anyhow::Result<ProcessTensor> {
        Ok(build_common_cause(gamma, self.input_dims(), self.output_dims())?)
    }

    /// Instrument used for the recovered process.
    pub fn blocking_instrument_name(self) -> &'static str {
        match self {
            Self::Lambda => "theta",
            Self::Omega => "xi",
        }
    }

    pub fn recovered_closed_form(self) -> ComplexMatrix {
        match self {
            Self::Lambda => reference::recovered_lambda(),
            Self::Omega => reference::recovered_omega(),
        }
    }

    /// Noise at which a replay reaches the tomography fidelity of the experiment.
    pub fn experiment_noise(self) -> NoiseModel {
        match self {
            Self::Lambda => NoiseModel { depolarizing: 0.15, rotation: 0.1 },
            Self::Omega => NoiseModel { depolarizing: 0.005, rotation: 0.1 },
        }
    }

    pub fn non_markovianity_refs(self) -> Vec<Reference> {
        match self {
            Self::Lambda => vec![theory(0.329), experiment(0.285, 0.004)],
            Self::Omega => vec![theory(0.5), experiment(0.458, 0.004)],
        }
    }

    pub fn cmi_refs(self) -> Vec<Reference> {
        match self {
            Self::Lambda => vec![theory(0.059), experiment(0.0524, 0.0014)],
            Self::Omega => vec![theory(0.5), experiment(0.443, 0.004)],
        }
    }

    pub fn tomography_fidelity_refs(self) -> Vec<Reference> {
        match self {
            Self::Lambda => vec![experiment(0.9862, 0.0005)],
            Self::Omega => vec![experiment(0.9858, 0.0008)],
        }
    }

    pub fn recovered_fidelity_refs(self) -> Vec<Reference> {
        match self {
            Self::Lambda => vec![experiment(0.9979, 0.0014)],
            Self::Omega => vec![experiment(0.9960, 0.0011)],
        }
    }

    /// The published maxima carry no uncertainty.
    pub fn scan_max_refs(self) -> Vec<Reference> {
        let v = match self {
            Self::Lambda => 0.048,
            Self::Omega => 0.022,
        };
        vec![Reference { value: v, uncertainty: None, kind: crate::report::RefKind::Experimental }]
    }
}

/// Published per-event memory strengths for a (process, instrument) pair.
pub fn event_refs(process: ProcessName, instrument: &str, event: usize) -> Vec<Reference> {
    match (process, instrument, event) {
        (ProcessName::Lambda, "theta", 0) => vec![experiment(0.0042, 0.0010)],
        (ProcessName::Lambda, "theta", 1) => vec![experiment(0.0053, 0.0010)],
        (ProcessName::Lambda, "theta", 2) => vec![experiment(0.0098, 0.0014)],
        (ProcessName::Lambda, "z", 0) => vec![theory(0.0514), experiment(0.0410, 0.0015)],
        (ProcessName::Omega, "sharp", 0) => vec![theory(0.2075), experiment(0.216, 0.001)],
        (ProcessName::Omega, "sharp", 1) => vec![theory(0.2075), experiment(0.171, 0.0009)],
        (ProcessName::Omega, "sharp", 2) => vec![theory(0.2075), experiment(0.165, 0.001)],
        (ProcessName::Omega, "sharp", 3) => vec![theory(0.2075), experiment(0.188, 0.0009)],
        (ProcessName::Omega, "xi", _) => vec![theory(0.0), experiment(0.004, 0.002)],
        _ => Vec::new(),
    }
}

/// Published instrument-level (uniform mean) memory strength.
pub fn aggregate_refs(process: ProcessName, instrument: &str) -> Vec<Reference> {
    match (process, instrument) {
        (ProcessName::Omega, "sharp") => vec![experiment(0.185, 0.010)],
        _ => Vec::new(),
    }
}
