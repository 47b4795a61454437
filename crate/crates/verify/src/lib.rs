//! Holds the `acceptance` test target, which prints one PASS/FAIL line per
//! criterion: `cargo test -p thermosym-verify --test acceptance`.
