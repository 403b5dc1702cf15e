//! Feature-oriented toolkit for Java product lines.
//!
//! The crate covers the whole annotate-locate-extract workflow:
//!
//! * [`model`]: `featuremodel.afm` parsing, propositional semantics,
//!   configuration validation and brute-force enumeration;
//! * [`java`]: a spanned AST for a Java subset and a project-wide
//!   declaration/edge index;
//! * [`annotation`]: feature annotations over AST spans (`<file>.color`),
//!   feature colors (`color.json`) and `//#ifdef` export;
//! * [`discovery`]: candidate feature names from descriptions and code;
//! * [`location`]: trace-seeded annotation and neighbourhood propagation;
//! * [`interaction`]: `requires` / `mutual exclude` suggestions;
//! * [`variant`]: configuration-driven variant extraction;
//! * [`project`] and [`report`]: on-disk project layout and the static HTML view.

pub mod annotation;
pub mod discovery;
pub mod exec;
pub mod fsio;
pub mod interaction;
pub mod java;
pub mod location;
pub mod model;
pub mod project;
pub mod report;
pub mod variant;

pub use exec::Execution;
