//! Mild/severe disease classification from social-media message corpora.
//!
//! The pipeline matches messages to disease concepts, labels each concept
//! from a table of literature health utilities, turns every concept's
//! messages into emoticon, formality and sentiment-unigram rates, screens
//! and prunes those features, and fits one of four classifiers.

pub mod corpus;
pub mod features;
pub mod lexicon;
pub mod matcher;
pub mod ml;
pub mod pipeline;
pub mod screening;
pub mod seed;
