use std::fmt;

use ceitr_core::error::{Error, Result};
use ceitr_core::WeightMethod;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Learner {
    Tree,
    Forest,
}

/// The seven compared methods: the naive regression rule and every
/// (classifier, weight) pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MethodSpec {
    RegNaive,
    Learned { learner: Learner, weight: WeightMethod },
}

impl MethodSpec {
    pub const ALL: [MethodSpec; 7] = [
        Self::RegNaive,
        Self::Learned { learner: Learner::Tree, weight: WeightMethod::AipwNp },
        Self::Learned { learner: Learner::Tree, weight: WeightMethod::IpwP },
        Self::Learned { learner: Learner::Tree, weight: WeightMethod::AipwP },
        Self::Learned { learner: Learner::Forest, weight: WeightMethod::AipwNp },
        Self::Learned { learner: Learner::Forest, weight: WeightMethod::IpwP },
        Self::Learned { learner: Learner::Forest, weight: WeightMethod::AipwP },
    ];

    /// Weights the method trains on; the naive rule reads the sign of the
    /// regression-based contrast.
    pub fn weight(self) -> WeightMethod {
        match self {
            Self::RegNaive => WeightMethod::RegBased,
            Self::Learned { weight, .. } => weight,
        }
    }

    pub fn learner(self) -> Option<Learner> {
        match self {
            Self::RegNaive => None,
            Self::Learned { learner, .. } => Some(learner),
        }
    }

    pub fn label(self) -> String {
        match self {
            Self::RegNaive => "Reg-naive".into(),
            Self::Learned { learner, weight } => {
                let l = match learner {
                    Learner::Tree => "DT",
                    Learner::Forest => "CRF",
                };
                format!("{l}-{}", weight.label().to_ascii_uppercase())
            }
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_uppercase();
        if t == "REG-NAIVE" || t == "NAIVE" {
            return Ok(Self::RegNaive);
        }
        let (l, w) = t
            .split_once('-')
            .ok_or_else(|| Error::Parse(format!("unknown method {s:?}; expected e.g. CRF-AIPW-P or Reg-naive")))?;
        let learner = match l {
            "DT" => Learner::Tree,
            "CRF" => Learner::Forest,
            _ => return Err(Error::Parse(format!("unknown classifier {l:?} in method {s:?}; use DT or CRF"))),
        };
        let weight = WeightMethod::parse(w)?;
        if weight == WeightMethod::RegBased {
            return Err(Error::Parse(format!("method {s:?}: regression weights are only used by Reg-naive")));
        }
        Ok(Self::Learned { learner, weight })
    }

    pub fn parse_list(items: &[String]) -> Result<Vec<Self>> {
        let mut out: Vec<Self> = Vec::new();
        for item in items {
            if item.eq_ignore_ascii_case("all") {
                out.extend(Self::ALL);
            } else {
                out.push(Self::parse(item)?);
            }
        }
        let mut seen = Vec::new();
        out.retain(|m| {
            let fresh = !seen.contains(m);
            seen.push(*m);
            fresh
        });
        if out.is_empty() {
            return Err(Error::InvalidArgument("no methods selected".into()));
        }
        Ok(out)
    }
}

impl fmt::Display for MethodSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}
