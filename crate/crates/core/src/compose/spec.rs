use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::pretrain::PretrainMethod;
use crate::rl::BaseAlgo;

/// Where offline transitions come from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DataSource {
    Demos,
    /// Transitions collected by rolling out the pretrained policy.
    Rollouts,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MixerKind {
    None,
    Ibrl,
    Cheq,
    ResRl,
}

impl MixerKind {
    pub const ALL: [MixerKind; 4] = [Self::None, Self::Ibrl, Self::Cheq, Self::ResRl];

    pub fn name(self) -> Option<&'static str> {
        match self {
            Self::None => None,
            Self::Ibrl => Some("ibrl"),
            Self::Cheq => Some("cheq"),
            Self::ResRl => Some("resrl"),
        }
    }
}

/// One agent in the strategy lattice: base learner plus direct data use,
/// pretrained initialization and action mixing components.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct AgentSpec {
    pub base: BaseAlgo,
    pub source: DataSource,
    pub prefill: bool,
    pub auxbc: bool,
    pub init: Option<PretrainMethod>,
    pub mixer: MixerKind,
}

/// Canonical component names in canonical order.
pub const COMPONENTS: [&str; 12] = ["demos", "rollouts", "prefill", "auxbc", "bc", "mcq", "calql", "cqlrho", "cqlh", "resrl", "ibrl", "cheq"];

impl Default for AgentSpec {
    fn default() -> Self {
        AgentSpec { base: BaseAlgo::Sac, source: DataSource::Demos, prefill: false, auxbc: false, init: None, mixer: MixerKind::None }
    }
}

impl AgentSpec {
    pub fn baseline(base: BaseAlgo) -> Self {
        AgentSpec { base, ..Default::default() }
    }

    /// Offline transitions are consumed directly (prefill or auxbc).
    pub fn uses_data(&self) -> bool {
        self.prefill || self.auxbc
    }

    pub fn is_baseline(&self) -> bool {
        !self.uses_data() && self.init.is_none() && self.mixer == MixerKind::None
    }

    /// A pretrained policy backs the mixer, the initialization or rollouts.
    pub fn needs_offline_policy(&self) -> bool {
        self.init.is_some() || self.mixer != MixerKind::None || (self.uses_data() && self.source == DataSource::Rollouts)
    }

    /// Drops fields that have no effect (a source without a consumer).
    pub fn normalized(mut self) -> Self {
        if !self.uses_data() {
            self.source = DataSource::Demos;
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.uses_data() && self.source == DataSource::Rollouts && self.init.is_none() {
            return Err(Error::config("rollouts need a pretrained policy: set an initialization (bc, mcq, calql, cqlrho or cqlh)"));
        }
        Ok(())
    }

    /// Component names present in this spec, canonical order.
    pub fn components(&self) -> Vec<&'static str> {
        let s = self.normalized();
        let mut out = Vec::new();
        if s.uses_data() {
            out.push(match s.source {
                DataSource::Demos => "demos",
                DataSource::Rollouts => "rollouts",
            });
        }
        if s.prefill {
            out.push("prefill");
        }
        if s.auxbc {
            out.push("auxbc");
        }
        if let Some(m) = s.init {
            out.push(m.name());
        }
        if let Some(m) = s.mixer.name() {
            out.push(m);
        }
        out
    }

    pub fn has(&self, component: &str) -> bool {
        self.components().contains(&component)
    }

    /// The spec with `component` switched off; the data source components
    /// swap with each other. `None` when the component is absent, unknown,
    /// or its removal yields an invalid spec.
    pub fn without(&self, component: &str) -> Option<AgentSpec> {
        if !self.has(component) {
            return None;
        }
        let mut s = *self;
        match component {
            "demos" => s.source = DataSource::Rollouts,
            "rollouts" => s.source = DataSource::Demos,
            "prefill" => s.prefill = false,
            "auxbc" => s.auxbc = false,
            "resrl" | "ibrl" | "cheq" => s.mixer = MixerKind::None,
            _ => s.init = None,
        }
        let s = s.normalized();
        s.validate().ok().map(|_| s)
    }

    /// Every valid spec on `base`, deduplicated, in canonical-string order.
    pub fn lattice(base: BaseAlgo) -> Vec<AgentSpec> {
        let mut out = Vec::new();
        for (prefill, auxbc) in [(false, false), (true, false), (false, true), (true, true)] {
            for source in [DataSource::Demos, DataSource::Rollouts] {
                for init in std::iter::once(None).chain(PretrainMethod::ALL.map(Some)) {
                    for mixer in MixerKind::ALL {
                        let s = AgentSpec { base, source, prefill, auxbc, init, mixer }.normalized();
                        if s.validate().is_ok() && !out.contains(&s) {
                            out.push(s);
                        }
                    }
                }
            }
        }
        out.sort_by_key(|s| s.to_string());
        out
    }
}

impl fmt::Display for AgentSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.base.name())?;
        for c in self.components() {
            write!(f, "+{c}")?;
        }
        Ok(())
    }
}

impl FromStr for AgentSpec {
    type Err = Error;

    /// Parses `+`-joined component names, e.g. `td3+demos+prefill+bc`. The
    /// base defaults to sac; `prefill`/`auxbc` without a source use demos.
    fn from_str(text: &str) -> Result<Self> {
        let mut spec = AgentSpec::default();
        let (mut base, mut source) = (None, None);
        let mut seen = Vec::new();
        for tok in text.split('+').map(str::trim) {
            if seen.contains(&tok) {
                return Err(Error::config(format!("agent spec '{text}': component '{tok}' repeated")));
            }
            seen.push(tok);
            let clash = |what: &str| Error::config(format!("agent spec '{text}': more than one {what}"));
            match tok {
                "sac" | "td3" => {
                    if base.is_some() {
                        return Err(clash("base algorithm"));
                    }
                    base = Some(if tok == "sac" { BaseAlgo::Sac } else { BaseAlgo::Td3 });
                }
                "demos" | "rollouts" => {
                    if source.is_some() {
                        return Err(clash("data source"));
                    }
                    source = Some(if tok == "demos" { DataSource::Demos } else { DataSource::Rollouts });
                }
                "prefill" => spec.prefill = true,
                "auxbc" => spec.auxbc = true,
                "ibrl" | "cheq" | "resrl" => {
                    if spec.mixer != MixerKind::None {
                        return Err(clash("mixer"));
                    }
                    spec.mixer = match tok {
                        "ibrl" => MixerKind::Ibrl,
                        "cheq" => MixerKind::Cheq,
                        _ => MixerKind::ResRl,
                    };
                }
                other => {
                    let m: PretrainMethod = other
                        .parse()
                        .map_err(|_| Error::config(format!("agent spec '{text}': unknown component '{other}'")))?;
                    if spec.init.is_some() {
                        return Err(clash("initialization"));
                    }
                    spec.init = Some(m);
                }
            }
        }
        spec.base = base.unwrap_or(BaseAlgo::Sac);
        if let Some(src) = source {
            if !spec.uses_data() {
                return Err(Error::config(format!("agent spec '{text}': data source given without prefill or auxbc")));
            }
            spec.source = src;
        }
        spec.validate()?;
        Ok(spec.normalized())
    }
}
