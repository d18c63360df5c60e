//! A 5x7 bitmap font for the uppercase Latin alphabet.

use crate::tensor::BinaryTensor3;

pub const GLYPH_H: usize = 7;
pub const GLYPH_W: usize = 5;
pub const ALPHABET: &str = "ABCDEFGHIJKLMNOPQRSTUVWXYZ";

#[rustfmt::skip]
const ROWS: [[&str; GLYPH_H]; 26] = [
    [" ### ", "#   #", "#   #", "#####", "#   #", "#   #", "#   #"],
    ["#### ", "#   #", "#   #", "#### ", "#   #", "#   #", "#### "],
    [" ### ", "#   #", "#    ", "#    ", "#    ", "#   #", " ### "],
    ["#### ", "#   #", "#   #", "#   #", "#   #", "#   #", "#### "],
    ["#####", "#    ", "#    ", "#### ", "#    ", "#    ", "#####"],
    ["#####", "#    ", "#    ", "#### ", "#    ", "#    ", "#    "],
    [" ### ", "#   #", "#    ", "# ###", "#   #", "#   #", " ####"],
    ["#   #", "#   #", "#   #", "#####", "#   #", "#   #", "#   #"],
    [" ### ", "  #  ", "  #  ", "  #  ", "  #  ", "  #  ", " ### "],
    ["  ###", "   # ", "   # ", "   # ", "   # ", "#  # ", " ##  "],
    ["#   #", "#  # ", "# #  ", "##   ", "# #  ", "#  # ", "#   #"],
    ["#    ", "#    ", "#    ", "#    ", "#    ", "#    ", "#####"],
    ["#   #", "## ##", "# # #", "# # #", "#   #", "#   #", "#   #"],
    ["#   #", "#   #", "##  #", "# # #", "#  ##", "#   #", "#   #"],
    [" ### ", "#   #", "#   #", "#   #", "#   #", "#   #", " ### "],
    ["#### ", "#   #", "#   #", "#### ", "#    ", "#    ", "#    "],
    [" ### ", "#   #", "#   #", "#   #", "# # #", "#  # ", " ## #"],
    ["#### ", "#   #", "#   #", "#### ", "# #  ", "#  # ", "#   #"],
    [" ####", "#    ", "#    ", " ### ", "    #", "    #", "#### "],
    ["#####", "  #  ", "  #  ", "  #  ", "  #  ", "  #  ", "  #  "],
    ["#   #", "#   #", "#   #", "#   #", "#   #", "#   #", " ### "],
    ["#   #", "#   #", "#   #", "#   #", "#   #", " # # ", "  #  "],
    ["#   #", "#   #", "#   #", "# # #", "# # #", "# # #", " # # "],
    ["#   #", "#   #", " # # ", "  #  ", " # # ", "#   #", "#   #"],
    ["#   #", "#   #", " # # ", "  #  ", "  #  ", "  #  ", "  #  "],
    ["#####", "    #", "   # ", "  #  ", " #   ", "#    ", "#####"],
];

/// The `7 x 5` bitmap of an uppercase letter, or `None` for other chars.
pub fn glyph(ch: char) -> Option<BinaryTensor3> {
    let i = ALPHABET.find(ch)?;
    let rows = &ROWS[i];
    BinaryTensor3::from_fn(1, GLYPH_H, GLYPH_W, |_, r, c| rows[r].as_bytes()[c] == b'#').ok()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_glyphs_distinct_and_well_formed() {
        for rows in ROWS.iter() {
            assert!(rows.iter().all(|r| r.len() == GLYPH_W));
        }
        let gs: alloc::vec::Vec<_> = ALPHABET.chars().map(|c| glyph(c).unwrap()).collect();
        for i in 0..gs.len() {
            assert!(gs[i].count_ones() > 5);
            for j in 0..i {
                assert_ne!(gs[i], gs[j]);
            }
        }
        assert!(glyph('a').is_none());
    }
}
