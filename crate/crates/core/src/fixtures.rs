//! The four-depot example used throughout the tests and documentation.
//!
//! Subject line "Kinston Military Rail Depot" (A), "a rail depot" (B),
//! "the ammunition depot in Fairview" (C) and "the depot" (D).

use crate::pairs::PairTable;
use crate::set::CoreferenceSet;
use crate::template::{RefForm, Template};

pub fn kinston_templates() -> [Template; 4] {
    let a = Template::new("A", 6)
        .with_slot("FACILITY", "DEPOT")
        .with_slot("NUMBER", "1")
        .with_slot("LOCATION", "KINSTON")
        .with_slot("TYPE", "RAIL")
        .with_form(RefForm::Neither);
    let b = Template::new("B", 35)
        .with_slot("FACILITY", "DEPOT")
        .with_slot("NUMBER", "1")
        .with_slot("TYPE", "RAIL")
        .with_form(RefForm::Indefinite);
    let c = Template::new("C", 155)
        .with_slot("FACILITY", "DEPOT")
        .with_slot("NUMBER", "1")
        .with_slot("LOCATION", "FAIRVIEW")
        .with_slot("TYPE", "AMMUNITION")
        .with_form(RefForm::Definite);
    let d = Template::new("D", 290)
        .with_slot("FACILITY", "DEPOT")
        .with_slot("NUMBER", "1")
        .with_form(RefForm::Definite)
        .with_preferred("B")
        .with_possible("C");
    [a, b, c, d]
}

pub fn kinston_set() -> CoreferenceSet {
    CoreferenceSet::new("kinston", kinston_templates().to_vec(), Vec::<(String, String)>::new())
        .expect("fixture is valid")
}

/// Pairwise coreference probabilities for the compatible pairs of the example.
pub fn kinston_pairs() -> PairTable {
    let mut table = PairTable::new();
    table.insert("A", "B", 0.671);
    table.insert("A", "D", 0.505);
    table.insert("B", "D", 0.752);
    table.insert("C", "D", 0.504);
    table
}
