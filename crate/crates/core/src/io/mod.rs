//! On-disk formats: ASCII PLY point clouds, trajectory directories with a
//! JSON manifest, and JSON metric reports.

mod ply;
mod report;
mod trajectory;

pub use ply::{parse_ply, read_ply, to_ply_string, write_ply};
pub use report::{read_report, write_report, Conventions, ReportDocument};
pub use trajectory::{
    checkpoint_file_name, read_json, read_trajectory, write_json, write_trajectory, Creation, Metadata,
    TrajectoryManifest, MANIFEST_FILE, MANIFEST_VERSION,
};

pub(crate) fn unix_millis() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map_or(0, |d| d.as_millis() as u64)
}
