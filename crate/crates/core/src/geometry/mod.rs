pub mod face;
pub mod mesh;
pub mod part;
pub mod point;

pub use face::{
    decode_face, face_normal_at, grid_coords, grid_index, infer_kind, BoundaryEdge, FaceGrid, FaceKind, GridIndex,
    EDGE_SAMPLES, GRID_POINTS, GRID_RES,
};
pub use mesh::{
    closest_point_on_mesh, point_to_mesh_distance, project_to_face, triangulate, FaceMesh, MeshBvh, Triangle,
    TriangleSoup,
};
pub use part::{Face, PartModel};
pub use point::{BoundingBox, Point3, RigidTransform};
