use std::collections::btree_map::Entry;

use serde::Serialize;

use crate::star_schema::FactAccountBalance;
use crate::store::FactStore;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct UpsertStats {
    pub inserted: usize,
    pub updated: usize,
    pub unchanged: usize,
}

/// Differential load keyed by (value date, account).
///
/// A new key is inserted. An existing key is overwritten, all four amounts,
/// only when its EUR balance or EUR working balance differs; otherwise it is
/// left as stored.
pub fn upsert_facts(store: &mut FactStore, incoming: impl IntoIterator<Item = FactAccountBalance>) -> UpsertStats {
    let mut stats = UpsertStats::default();
    for fact in incoming {
        match store.entry(fact.key()) {
            Entry::Vacant(slot) => {
                slot.insert(fact);
                stats.inserted += 1;
            }
            Entry::Occupied(mut slot) => {
                let current = slot.get();
                if current.balance_eur != fact.balance_eur || current.working_eur != fact.working_eur {
                    slot.insert(fact);
                    stats.updated += 1;
                } else {
                    stats.unchanged += 1;
                }
            }
        }
    }
    stats
}
