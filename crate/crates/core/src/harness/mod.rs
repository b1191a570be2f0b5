//! Study drivers, validation workflow, and report emission.
