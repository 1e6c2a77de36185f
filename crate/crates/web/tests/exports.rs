use macov_web::{builtin_map, discover, fiedler_heatmap, joint_spectrum};
use serde_json::Value;

#[test]
fn heatmap_covers_every_free_cell() {
    let map = builtin_map("fourroom-2agent").unwrap();
    let h: Value = serde_json::from_str(&fiedler_heatmap(&map).unwrap()).unwrap();
    assert_eq!(h["cells"].as_array().unwrap().len(), 121);
    assert!(h["lambda2"].as_f64().unwrap() > 0.0);
}

#[test]
fn four_room_discovery_targets_the_goal_corner() {
    let map = builtin_map("fourroom-2agent").unwrap();
    let groups: Value = serde_json::from_str(&discover(&map, 4).unwrap()).unwrap();
    let options = groups[0]["options"].as_array().unwrap();
    assert_eq!(options.len(), 4);
    // Goal cells sit in rows 10-11, columns 12-13 of the file.
    let in_goal_corner = options.iter().any(|o| {
        o.as_array().unwrap().iter().all(|cell| {
            let (r, c) = (cell[0].as_u64().unwrap(), cell[1].as_u64().unwrap());
            r >= 9 && c >= 11
        })
    });
    assert!(in_goal_corner, "{options:?}");
}

#[test]
fn spectrum_of_two_triangles_is_exact() {
    let k3 = "n 3\n0 1\n1 2\n0 2\n";
    let s: Value = serde_json::from_str(&joint_spectrum(k3, k3).unwrap()).unwrap();
    assert_eq!(s["estimated"].as_array().unwrap().len(), 9);
    assert!(s["max_abs_error"].as_f64().unwrap() < 1e-9);
}

#[test]
fn unknown_map_name() {
    assert!(builtin_map("no-such-map").is_none());
}
