use std::collections::BTreeMap;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::AssociationError;

use super::{AssociationConfig, Associator, OfflineTracker, OnlineTracker};

/// A registered strategy: its defaults and how to build it.
#[derive(Clone, Copy)]
pub struct StrategyEntry {
    pub name: &'static str,
    pub summary: &'static str,
    pub defaults: fn() -> AssociationConfig,
    pub build: fn(AssociationConfig) -> Result<Box<dyn Associator>, AssociationError>,
}

/// Per-run overrides applied on top of a strategy's defaults.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ConfigOverrides {
    pub lambda: Option<f64>,
    pub tau: Option<f64>,
    pub max_gap: Option<u32>,
}

impl ConfigOverrides {
    pub fn apply(&self, mut cfg: AssociationConfig) -> AssociationConfig {
        if let Some(l) = self.lambda {
            cfg.lambda = l;
        }
        if let Some(t) = self.tau {
            cfg.tau = t;
        }
        if let Some(g) = self.max_gap {
            cfg.max_gap = g;
        }
        cfg
    }
}

#[derive(Default)]
pub struct AssociatorRegistry {
    entries: BTreeMap<&'static str, StrategyEntry>,
}

impl AssociatorRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registry holding the `online` and `offline` strategies.
    pub fn with_builtins() -> Self {
        let mut r = Self::new();
        r.register(StrategyEntry {
            name: "online",
            summary: "frame-by-frame assignment, motion-weighted",
            defaults: || AssociationConfig {
                lambda: 0.7,
                tau: 0.5,
                max_gap: 8,
            },
            build: |cfg| Ok(Box::new(OnlineTracker::new(cfg)?)),
        });
        r.register(StrategyEntry {
            name: "offline",
            summary: "global agglomerative clustering, appearance-weighted",
            defaults: || AssociationConfig {
                lambda: 0.3,
                tau: 0.6,
                max_gap: 8,
            },
            build: |cfg| Ok(Box::new(OfflineTracker::new(cfg)?)),
        });
        r
    }

    /// Adds or replaces a strategy under its name.
    pub fn register(&mut self, entry: StrategyEntry) {
        self.entries.insert(entry.name, entry);
    }

    pub fn get(&self, name: &str) -> Option<&StrategyEntry> {
        self.entries.get(name)
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.keys().copied().collect()
    }

    /// Resolves `name`'s defaults with `overrides` applied.
    pub fn resolve(&self, name: &str, overrides: &ConfigOverrides) -> Result<AssociationConfig, AssociationError> {
        let entry = self.lookup(name)?;
        Ok(overrides.apply((entry.defaults)()))
    }

    pub fn build(&self, name: &str, overrides: &ConfigOverrides) -> Result<Box<dyn Associator>, AssociationError> {
        let entry = self.lookup(name)?;
        (entry.build)(overrides.apply((entry.defaults)()))
    }

    fn lookup(&self, name: &str) -> Result<&StrategyEntry, AssociationError> {
        self.get(name).ok_or_else(|| AssociationError::UnknownStrategy {
            name: name.to_string(),
            known: self.names().join(", "),
        })
    }
}

/// Shared registry with the built-in strategies.
pub fn builtin_registry() -> &'static AssociatorRegistry {
    static REGISTRY: OnceLock<AssociatorRegistry> = OnceLock::new();
    REGISTRY.get_or_init(AssociatorRegistry::with_builtins)
}
