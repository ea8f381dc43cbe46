pub mod applications;
pub mod convert;
pub mod corpus;
pub mod element;
pub mod engine;
pub mod mechanism;
pub mod mechsmiles;
pub mod molgraph;
pub mod par;
pub mod search;
pub mod smiles;
pub mod taskgen;
