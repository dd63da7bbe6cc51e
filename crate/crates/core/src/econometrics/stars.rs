//! Significance stars. Two conventions are supported: the coarse 1%/5%/10%
//! table convention (default) and the strict 0.1%/1%/5% figure convention.

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StarConvention {
    /// *** at 1%, ** at 5%, * at 10%.
    Coarse,
    /// *** at 0.1%, ** at 1%, * at 5%.
    Strict,
}

impl StarConvention {
    pub fn thresholds(&self) -> [f64; 3] {
        match self {
            StarConvention::Coarse => [0.01, 0.05, 0.10],
            StarConvention::Strict => [0.001, 0.01, 0.05],
        }
    }
}

/// Star string for a p-value: inclusive at each threshold.
pub fn stars(p: f64, convention: StarConvention) -> &'static str {
    let [three, two, one] = convention.thresholds();
    if p <= three {
        "***"
    } else if p <= two {
        "**"
    } else if p <= one {
        "*"
    } else {
        ""
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coarse_convention_boundaries() {
        let c = StarConvention::Coarse;
        assert_eq!(stars(0.009, c), "***");
        assert_eq!(stars(0.01, c), "***");
        assert_eq!(stars(0.010_000_1, c), "**");
        assert_eq!(stars(0.04, c), "**");
        assert_eq!(stars(0.05, c), "**");
        assert_eq!(stars(0.07, c), "*");
        assert_eq!(stars(0.10, c), "*");
        assert_eq!(stars(0.100_000_1, c), "");
        assert_eq!(stars(0.9, c), "");
    }

    #[test]
    fn strict_convention_boundaries() {
        let s = StarConvention::Strict;
        assert_eq!(stars(0.000_5, s), "***");
        assert_eq!(stars(0.005, s), "**");
        assert_eq!(stars(0.04, s), "*");
        assert_eq!(stars(0.06, s), "");
    }
}
