use std::fmt;

use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum VarKind {
    Chance,
    Decision,
    Utility,
}

impl fmt::Display for VarKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            VarKind::Chance => "chance",
            VarKind::Decision => "decision",
            VarKind::Utility => "utility",
        })
    }
}

/// Finite ordered domain. Utility domains additionally carry the real value
/// of every element; their labels are the canonical formatting of those reals.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Domain {
    labels: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    reals: Option<Vec<f64>>,
}

impl Domain {
    pub fn labels<I, S>(labels: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Domain {
            labels: labels.into_iter().map(Into::into).collect(),
            reals: None,
        }
    }

    pub fn reals<I>(values: I) -> Self
    where
        I: IntoIterator<Item = f64>,
    {
        let reals: Vec<f64> = values.into_iter().collect();
        Domain {
            labels: reals.iter().map(|v| format_real(*v)).collect(),
            reals: Some(reals),
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn label(&self, index: usize) -> &str {
        &self.labels[index]
    }

    pub fn all_labels(&self) -> &[String] {
        &self.labels
    }

    pub fn real_values(&self) -> Option<&[f64]> {
        self.reals.as_deref()
    }

    pub fn is_numeric(&self) -> bool {
        self.reals.is_some()
    }

    /// Looks a value up by label; numeric domains also match by value, so
    /// `4`, `4.0` and `+4` all resolve to the same element.
    pub fn index_of(&self, label: &str) -> Option<usize> {
        if let Some(i) = self.labels.iter().position(|l| l == label) {
            return Some(i);
        }
        let reals = self.reals.as_ref()?;
        let wanted: f64 = label.parse().ok()?;
        reals.iter().position(|v| (v - wanted).abs() < 1e-12)
    }

    pub(crate) fn has_duplicates(&self) -> bool {
        if let Some(reals) = &self.reals {
            let mut seen = std::collections::HashSet::new();
            return reals.iter().any(|v| !seen.insert(v.to_bits()));
        }
        let mut seen = std::collections::HashSet::new();
        self.labels.iter().any(|l| !seen.insert(l.as_str()))
    }
}

pub fn format_real(value: f64) -> String {
    if value == 0.0 {
        return "0".to_string();
    }
    format!("{value}")
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    /// 1-based agent index; present exactly for decisions and utilities.
    pub agent: Option<usize>,
    pub domain: Domain,
}

impl Variable {
    pub fn chance(name: impl Into<String>, domain: Domain) -> Self {
        Variable {
            name: name.into(),
            kind: VarKind::Chance,
            agent: None,
            domain,
        }
    }

    pub fn decision(name: impl Into<String>, agent: usize, domain: Domain) -> Self {
        Variable {
            name: name.into(),
            kind: VarKind::Decision,
            agent: Some(agent),
            domain,
        }
    }

    pub fn utility(name: impl Into<String>, agent: usize, values: &[f64]) -> Self {
        Variable {
            name: name.into(),
            kind: VarKind::Utility,
            agent: Some(agent),
            domain: Domain::reals(values.iter().copied()),
        }
    }

    pub fn card(&self) -> usize {
        self.domain.len()
    }

    pub fn is_decision(&self) -> bool {
        self.kind == VarKind::Decision
    }

    pub fn is_utility(&self) -> bool {
        self.kind == VarKind::Utility
    }
}
