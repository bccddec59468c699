use std::collections::BTreeMap;
use std::sync::Arc;

use super::{OpaqueSig, Symbol};

/// Name resolution for parsers: declared symbols and opaque signatures.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SymbolTable {
    symbols: BTreeMap<String, Symbol>,
    opaques: BTreeMap<String, Arc<OpaqueSig>>,
}

impl SymbolTable {
    pub fn new() -> Self {
        SymbolTable::default()
    }

    /// Adds a symbol; returns the existing one if the name is taken.
    pub fn declare(&mut self, s: Symbol) -> Result<(), Symbol> {
        if let Some(prev) = self.symbols.get(s.name()) {
            return Err(prev.clone());
        }
        self.symbols.insert(s.name().to_string(), s);
        Ok(())
    }

    pub fn declare_opaque(&mut self, sig: Arc<OpaqueSig>) -> Result<(), Symbol> {
        self.declare(sig.name.clone())?;
        self.opaques.insert(sig.name.name().to_string(), sig);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Symbol> {
        self.symbols.get(name)
    }

    pub fn opaque(&self, name: &str) -> Option<&Arc<OpaqueSig>> {
        self.opaques.get(name)
    }

    pub fn symbols(&self) -> impl Iterator<Item = &Symbol> {
        self.symbols.values()
    }

    pub fn opaques(&self) -> impl Iterator<Item = &Arc<OpaqueSig>> {
        self.opaques.values()
    }
}
