/// Control points `(index, rgb)` of the stress colormap: pale blue through
/// cyan, green, olive and orange to dark red.
const STOPS: [(usize, [u8; 3]); 7] = [
    (0, [225, 235, 250]),
    (51, [100, 190, 240]),
    (102, [70, 190, 150]),
    (140, [190, 180, 20]),
    (178, [240, 120, 0]),
    (217, [220, 30, 0]),
    (255, [180, 0, 0]),
];

/// Piecewise-linear interpolation of [`STOPS`], rounded half up.
const fn build_table() -> [[u8; 3]; 256] {
    let mut table = [[0u8; 3]; 256];
    let mut s = 0;
    while s + 1 < STOPS.len() {
        let (i0, c0) = STOPS[s];
        let (i1, c1) = STOPS[s + 1];
        let len = (i1 - i0) as i32;
        let mut idx = i0;
        while idx <= i1 {
            let t = (idx - i0) as i32;
            let mut ch = 0;
            while ch < 3 {
                let num = c0[ch] as i32 * len + (c1[ch] as i32 - c0[ch] as i32) * t;
                table[idx][ch] = ((2 * num + len) / (2 * len)) as u8;
                ch += 1;
            }
            idx += 1;
        }
        s += 1;
    }
    // Rounding can lift the channel sum by a unit or two between entries;
    // take it off the brightest channel so gray never rises with stress.
    let mut k = 1;
    while k < 256 {
        let prev = table[k - 1][0] as i32 + table[k - 1][1] as i32 + table[k - 1][2] as i32;
        let cur = table[k][0] as i32 + table[k][1] as i32 + table[k][2] as i32;
        if cur > prev {
            let mut top = 0;
            if table[k][1] > table[k][top] {
                top = 1;
            }
            if table[k][2] > table[k][top] {
                top = 2;
            }
            table[k][top] -= (cur - prev) as u8;
        }
        k += 1;
    }
    table
}

/// 256-entry lookup table from a normalized scalar to an RGB color. Entry 0
/// is also used for masked cells.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColorMap {
    pub table: [[u8; 3]; 256],
}

pub const STRESS_TABLE: [[u8; 3]; 256] = build_table();

impl Default for ColorMap {
    fn default() -> Self {
        Self { table: STRESS_TABLE }
    }
}

impl ColorMap {
    /// Table index of `t ∈ [0, 1]`; out-of-range values clamp and NaN maps
    /// to 0.
    pub fn index(t: f64) -> usize {
        if t.is_nan() {
            return 0;
        }
        (t.clamp(0.0, 1.0) * 255.0).round() as usize
    }

    pub fn color(&self, t: f64) -> [u8; 3] {
        self.table[Self::index(t)]
    }
}

/// Mean of the three channels.
pub fn gray_of(rgb: [u8; 3]) -> f64 {
    (rgb[0] as f64 + rgb[1] as f64 + rgb[2] as f64) / 3.0
}
