//! Shared entry point for the criterion benches; all content lives in `benches/`.
