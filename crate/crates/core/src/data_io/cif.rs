//! Minimal CIF export with every site listed explicitly.

use std::fmt::Write;

use super::records::StructureRecord;
use crate::symmetry::space_group_symbol;

fn label_safe(id: &str) -> String {
    id.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect()
}

/// Cell and sites at six decimals. Sites are written in full with the
/// identity as the only listed operation, so readers need no symmetry
/// expansion; the space group is recorded for reference.
pub fn export_cif(record: &StructureRecord) -> String {
    let p = record.structure.parameters();
    let mut s = String::new();
    let _ = writeln!(s, "data_{}", label_safe(&record.id));
    let _ = writeln!(s, "_symmetry_space_group_name_H-M   '{}'", space_group_symbol(record.space_group));
    let _ = writeln!(s, "_symmetry_Int_Tables_number   {}", record.space_group);
    for (tag, v) in [
        ("_cell_length_a", p.a),
        ("_cell_length_b", p.b),
        ("_cell_length_c", p.c),
        ("_cell_angle_alpha", p.alpha),
        ("_cell_angle_beta", p.beta),
        ("_cell_angle_gamma", p.gamma),
        ("_cell_volume", p.volume()),
    ] {
        let _ = writeln!(s, "{tag}   {v:.6}");
    }
    s.push_str("loop_\n _symmetry_equiv_pos_site_id\n _symmetry_equiv_pos_as_xyz\n  1  'x, y, z'\n");
    s.push_str("loop_\n _atom_site_label\n _atom_site_type_symbol\n _atom_site_fract_x\n _atom_site_fract_y\n _atom_site_fract_z\n _atom_site_occupancy\n");
    let mut per_element = std::collections::BTreeMap::new();
    for (el, x) in record.structure.species.iter().zip(&record.structure.frac_coords) {
        let n = per_element.entry(el.as_str()).or_insert(0usize);
        let _ = writeln!(s, "  {el}{n}  {el}  {:.6}  {:.6}  {:.6}  1", x[0], x[1], x[2]);
        *n += 1;
    }
    s
}
