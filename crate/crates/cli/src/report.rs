use serde::Serialize;

#[derive(Debug, Clone, Copy, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RefKind {
    Theoretical,
    Experimental,
}

#[derive(Debug, Clone, Serialize)]
pub struct Reference {
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub uncertainty: Option<f64>,
    pub kind: RefKind,
}

pub fn theory(value: f64) -> Reference {
    Reference { value, uncertainty: None, kind: RefKind::Theoretical }
}

pub fn experiment(value: f64, uncertainty: f64) -> Reference {
    Reference { value, uncertainty: Some(uncertainty), kind: RefKind::Experimental }
}

/// A computed number plus any published values it can be compared with.
#[derive(Debug, Clone, Serialize)]
pub struct Quantity {
    pub value: f64,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub reference: Vec<Reference>,
}

pub fn q(value: f64) -> Quantity {
    Quantity { value, reference: Vec::new() }
}

pub fn qr(value: f64, reference: Vec<Reference>) -> Quantity {
    Quantity { value, reference }
}

#[derive(Debug, Clone, Copy, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Comparison {
    /// |value − target| ≤ tolerance
    Within,
    /// value < tolerance
    Below,
    /// value > tolerance
    Above,
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target: Option<f64>,
    pub comparison: Comparison,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    fn evaluate(&mut self) {
        self.pass = match self.comparison {
            Comparison::Within => (self.value - self.target.unwrap_or(0.0)).abs() <= self.tolerance,
            Comparison::Below => self.value < self.tolerance,
            Comparison::Above => self.value > self.tolerance,
        };
    }
}

pub fn within(name: &str, value: f64, target: f64, tolerance: f64) -> Check {
    let mut c =
        Check { name: name.into(), value, target: Some(target), comparison: Comparison::Within, tolerance, pass: false };
    c.evaluate();
    c
}

pub fn below(name: &str, value: f64, bound: f64) -> Check {
    let mut c = Check { name: name.into(), value, target: None, comparison: Comparison::Below, tolerance: bound, pass: false };
    c.evaluate();
    c
}

pub fn above(name: &str, value: f64, bound: f64) -> Check {
    let mut c = Check { name: name.into(), value, target: None, comparison: Comparison::Above, tolerance: bound, pass: false };
    c.evaluate();
    c
}

/// Replaces the tolerance of a named check and re-evaluates it.
pub fn override_tolerance(checks: &mut [Check], name: &str, tolerance: f64) -> bool {
    match checks.iter_mut().find(|c| c.name == name) {
        Some(c) => {
            c.tolerance = tolerance;
            c.evaluate();
            true
        }
        None => false,
    }
}

/// Check names with `pass == false`.
pub fn failures(checks: &[Check]) -> Vec<String> {
    checks.iter().filter(|c| !c.pass).map(|c| c.name.clone()).collect()
}
