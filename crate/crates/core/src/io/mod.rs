//! File formats, reports and CSV emission.

pub mod float;
pub mod mask;
pub mod network_file;
pub mod report;
pub mod spec_file;
pub mod tables;

pub use mask::{parse_mask_arg, parse_mask_names};
pub use network_file::{load_network, parse_network, print_network, save_network, LoadedNetwork};
pub use spec_file::{load_spec, parse_spec, SpecFile};
pub use tables::{load_labeled_set, parse_labeled_set, print_labeled_set, print_plot, print_regions};
