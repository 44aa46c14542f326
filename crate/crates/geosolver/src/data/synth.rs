//! Synthetic problem generation.
//!
//! Twelve single-reading templates cover the operator table: angle chasing
//! (parallel lines, supplementary pairs, triangle sums, isosceles triangles),
//! lengths (Pythagorean pairs, midpoints, perimeters, trigonometric ratios)
//! and areas (circles, rectangles, inscribed figures). Nine further variants
//! form four ambiguous families: within a family every variant draws its text
//! from one shared distribution, and only the diagram decides which reading
//! applies (a marked angle on a straight line, at a right-angle corner or at
//! a crossing; a third angle inside a triangle or exterior to it; a right
//! triangle labeled on both legs or on the hypotenuse and one leg; a circle
//! with a marked radius or a marked diameter). Each draw randomizes the
//! numbers, the point and line labels, the phrasing and the diagram jitter,
//! so two corpora from different seeds share structure but not surface form.
//!
//! Every generated problem is self-consistent by construction: its gold
//! program executes on the numbers bound from its own text and matches the
//! stored answer choice. Distractors are kept far outside the choice-matching
//! tolerance of the answer and of each other. Within an ambiguous family each
//! variant lists the other readings' values among its choices, so a solver
//! that commits to the wrong reading selects a wrong choice instead of
//! falling through to no result.

use rand::seq::IndexedRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::data::diagram::Canvas;
use crate::data::text::format_number;
use crate::data::Category;
use crate::knowledge::KnowledgeBase;
use crate::program::choice_tolerance;

pub struct DraftProblem {
    pub text: String,
    pub program: String,
    pub knowledge: Vec<Vec<usize>>,
    pub category: Category,
    pub choices: [f64; 4],
    pub answer_index: usize,
    pub canvas: Canvas,
}

const UPPER: [&str; 8] = ["A", "B", "C", "D", "E", "F", "P", "Q"];
const LINES: [&str; 6] = ["a", "b", "l", "m", "p", "q"];

fn pick<'a, R: Rng>(rng: &mut R, pool: &[&'a str]) -> &'a str {
    pool.choose(rng).expect("non-empty pool")
}

fn pick2<'a, R: Rng>(rng: &mut R, pool: &[&'a str]) -> (&'a str, &'a str) {
    let a = pick(rng, pool);
    loop {
        let b = pick(rng, pool);
        if b != a {
            return (a, b);
        }
    }
}

fn pick3<'a, R: Rng>(rng: &mut R, pool: &[&'a str]) -> (&'a str, &'a str, &'a str) {
    let (a, b) = pick2(rng, pool);
    loop {
        let c = pick(rng, pool);
        if c != a && c != b {
            return (a, b, c);
        }
    }
}

/// Two values are distinguishable when they sit well apart relative to the
/// choice-matching tolerance.
fn far(a: f64, b: f64) -> bool {
    (a - b).abs() > 5.0 * choice_tolerance(a).max(choice_tolerance(b))
}

/// Assemble four choices: the answer plus three distractors drawn from the
/// template's candidates, padded with generic offsets. All pairwise far.
fn make_choices(rng: &mut ChaCha8Rng, answer: f64, candidates: &[f64]) -> ([f64; 4], usize) {
    let mut chosen: Vec<f64> = vec![answer];
    let generic = [
        answer * 2.0,
        answer / 2.0,
        answer + 10.0,
        (answer - 10.0).abs(),
        answer * 1.5,
        answer + 20.0,
        answer * 0.75,
        answer + 5.0,
        answer * 3.0,
        answer + 35.0,
    ];
    for &c in candidates.iter().chain(generic.iter()) {
        if chosen.len() == 4 {
            break;
        }
        if c.is_finite() && c > 0.0 && chosen.iter().all(|&x| far(x, c)) {
            chosen.push(c);
        }
    }
    assert_eq!(chosen.len(), 4, "could not build 4 separated choices around {answer}");
    // deterministic shuffle of positions
    for i in (1..4).rev() {
        let j = rng.random_range(0..=i);
        chosen.swap(i, j);
    }
    let idx = chosen.iter().position(|&c| c == answer).expect("answer present");
    ([chosen[0], chosen[1], chosen[2], chosen[3]], idx)
}

fn jitter<R: Rng>(rng: &mut R, range: i64) -> i64 {
    rng.random_range(-range..=range)
}

fn ids(kb: &KnowledgeBase, concepts: &[&[&str]]) -> Vec<Vec<usize>> {
    concepts
        .iter()
        .map(|step| {
            step.iter()
                .map(|c| kb.id_of(c).unwrap_or_else(|| panic!("knowledge base lacks concept `{c}`")))
                .collect()
        })
        .collect()
}

/// Draw one problem. `rng` drives every random decision, so a fixed seed
/// reproduces text, numbers, choices and pixels exactly.
pub fn generate(rng: &mut ChaCha8Rng, kb: &KnowledgeBase, image_size: usize) -> DraftProblem {
    let template = rng.random_range(0..21);
    let s = image_size as i64;
    let mut canvas = Canvas::new(image_size);
    match template {
        0 => {
            // parallel lines with a bisected consecutive interior angle
            let x = f64::from(rng.random_range(3..=15) * 10);
            let (l1, l2) = pick2(rng, &LINES);
            let r = pick(rng, &UPPER);
            let xs = format_number(x);
            let text = match rng.random_range(0..2) {
                0 => format!(
                    "In the figure, line {l1} is parallel to line {l2}. A transversal crosses both lines and makes an angle of {xs} degrees with line {l1}. Ray {r} bisects the angle between the transversal and line {l2}. What is the measure of the angle between ray {r} and line {l2}?"
                ),
                _ => format!(
                    "Lines {l1} and {l2} in the figure are parallel. The transversal meets line {l1} at {xs} degrees, and ray {r} bisects the consecutive interior angle at line {l2}. Find the angle that ray {r} makes with line {l2}."
                ),
            };
            let answer = (180.0 - x) / 2.0;
            let (choices, answer_index) =
                make_choices(rng, answer, &[180.0 - x, x / 2.0, x, 90.0 + x / 2.0]);
            let y1 = s / 4 + jitter(rng, 3);
            let y2 = 3 * s / 4 + jitter(rng, 3);
            canvas.line(2, y1, s - 3, y1);
            canvas.line(2, y2, s - 3, y2);
            let tx1 = s / 3 + jitter(rng, 4);
            let tx2 = 2 * s / 3 + jitter(rng, 4);
            canvas.line(tx1, y1 - s / 8, tx2, y2 + s / 8);
            let mx = (tx1 + tx2) / 2 + s / 6;
            canvas.line(tx2 - (tx2 - tx1) / 4, y2, mx + s / 8, y2 - s / 3);
            canvas.arc(tx1 + 2, y1, s / 10, -60.0, 0.0);
            canvas.arc(tx2 - 2, y2, s / 10, 30.0, 120.0);
            DraftProblem {
                text,
                program: "Minus C_3 N_0 ; Half V_0".into(),
                knowledge: ids(kb, &[&["Parallel Lines"], &["Angle Bisector"]]),
                category: Category::Angle,
                choices,
                answer_index,
                canvas,
            }
        }
        1 => {
            // supplementary angles on a straight line
            let x = f64::from(rng.random_range(25..=155));
            let (a, b, c) = pick3(rng, &UPPER);
            let p = pick(rng, &["O", "G", "H"]);
            let xs = format_number(x);
            let text = match rng.random_range(0..2) {
                0 => format!(
                    "Point {p} lies on segment {a}{b}. Angle {a}{p}{c} measures {xs} degrees. Find the measure of angle {c}{p}{b}."
                ),
                _ => format!(
                    "In the figure, {a}{p}{b} is a straight line and ray {p}{c} stands on it. If angle {a}{p}{c} is {xs} degrees, what is the measure of angle {c}{p}{b}?"
                ),
            };
            let answer = 180.0 - x;
            let (choices, answer_index) = make_choices(rng, answer, &[x, (90.0 - x).abs(), x / 2.0]);
            let y = s / 2 + jitter(rng, 4);
            let px = s / 2 + jitter(rng, 4);
            canvas.line(3, y, s - 4, y);
            let rx = px + s / 4;
            canvas.line(px, y, rx - s / 8, y - s / 3);
            canvas.dot(px, y, 1);
            canvas.arc(px, y, s / 9, 0.0, 70.0);
            DraftProblem {
                text,
                program: "Minus C_3 N_0".into(),
                knowledge: ids(kb, &[&["Supplementary Angles"]]),
                category: Category::Angle,
                choices,
                answer_index,
                canvas,
            }
        }
        2 => {
            // third angle of a triangle
            let a = f64::from(rng.random_range(25..=85));
            let b = rng.random_range(25..=(160 - a as i64 - 15)) as f64;
            let (pa, pb, pc) = pick3(rng, &UPPER);
            let (av, bv) = (format_number(a), format_number(b));
            let text = match rng.random_range(0..2) {
                0 => format!(
                    "In triangle {pa}{pb}{pc}, angle {pa} measures {av} degrees and angle {pb} measures {bv} degrees. Find the measure of angle {pc}."
                ),
                _ => format!(
                    "Triangle {pa}{pb}{pc} is shown in the figure. Angle {pa} is {av} degrees, angle {pb} is {bv} degrees. What is the measure of the remaining angle?"
                ),
            };
            let answer = 180.0 - a - b;
            let (choices, answer_index) =
                make_choices(rng, answer, &[a + b, 180.0 - a, 180.0 - b, a]);
            let (x0, y0) = (s / 6 + jitter(rng, 3), 4 * s / 5 + jitter(rng, 3));
            let (x1, y1) = (5 * s / 6 + jitter(rng, 3), 4 * s / 5 + jitter(rng, 3));
            let (x2, y2) = (s / 2 + jitter(rng, 6), s / 6 + jitter(rng, 3));
            canvas.line(x0, y0, x1, y1);
            canvas.line(x1, y1, x2, y2);
            canvas.line(x2, y2, x0, y0);
            canvas.arc(x0, y0, s / 10, 0.0, 55.0);
            canvas.arc(x1, y1, s / 10, 125.0, 180.0);
            DraftProblem {
                text,
                program: "Add N_0 N_1 ; Minus C_3 V_0".into(),
                knowledge: ids(kb, &[&["Triangle Angle Sum"], &["Triangle Angle Sum"]]),
                category: Category::Angle,
                choices,
                answer_index,
                canvas,
            }
        }
        3 => {
            // hypotenuse from two legs
            let a = f64::from(rng.random_range(3..=12));
            let b = f64::from(rng.random_range(4..=13));
            let (pa, pb, pc) = pick3(rng, &UPPER);
            let (av, bv) = (format_number(a), format_number(b));
            let text = match rng.random_range(0..2) {
                0 => format!(
                    "In right triangle {pa}{pb}{pc}, the legs measure {av} and {bv}. Find the length of the hypotenuse."
                ),
                _ => format!(
                    "The right triangle in the figure has legs of length {av} and {bv}. What is the length of its hypotenuse?"
                ),
            };
            let answer = a.hypot(b);
            let (choices, answer_index) =
                make_choices(rng, answer, &[a + b, (a * a - b * b).abs().sqrt(), a.max(b)]);
            draw_right_triangle(&mut canvas, rng, s);
            DraftProblem {
                text,
                program: "PythHyp N_0 N_1".into(),
                knowledge: ids(kb, &[&["Pythagorean Theorem"]]),
                category: Category::Length,
                choices,
                answer_index,
                canvas,
            }
        }
        4 => {
            // leg from hypotenuse and the other leg
            let a = f64::from(rng.random_range(3..=12));
            let c = rng.random_range(a as i64 + 2..=16) as f64;
            let (pa, pb, pc) = pick3(rng, &UPPER);
            let (cv, av) = (format_number(c), format_number(a));
            let text = match rng.random_range(0..2) {
                0 => format!(
                    "Right triangle {pa}{pb}{pc} has a hypotenuse of length {cv} and one leg of length {av}. Find the length of the other leg."
                ),
                _ => format!(
                    "In the right triangle shown, the hypotenuse measures {cv} and one leg measures {av}. How long is the remaining leg?"
                ),
            };
            let answer = (c * c - a * a).sqrt();
            let (choices, answer_index) =
                make_choices(rng, answer, &[c - a, (c * c + a * a).sqrt(), c + a]);
            draw_right_triangle(&mut canvas, rng, s);
            DraftProblem {
                text,
                program: "PythLeg N_0 N_1".into(),
                knowledge: ids(kb, &[&["Pythagorean Theorem"]]),
                category: Category::Length,
                choices,
                answer_index,
                canvas,
            }
        }
        5 => {
            // midpoint halves a segment
            let l = f64::from(rng.random_range(4..=40));
            let (pa, pb) = pick2(rng, &UPPER);
            let m = pick(rng, &["M", "O"]);
            let lv = format_number(l);
            let text = match rng.random_range(0..2) {
                0 => format!(
                    "Point {m} is the midpoint of segment {pa}{pb}, which has length {lv}. Find the length of segment {pa}{m}."
                ),
                _ => format!(
                    "Segment {pa}{pb} in the figure measures {lv}, and {m} is its midpoint. What is the length of {pa}{m}?"
                ),
            };
            let answer = l / 2.0;
            let (choices, answer_index) = make_choices(rng, answer, &[2.0 * l, l, l / 4.0]);
            let y = s / 2 + jitter(rng, 5);
            canvas.line(s / 8, y, 7 * s / 8, y);
            canvas.dot(s / 8, y, 2);
            canvas.dot(7 * s / 8, y, 2);
            canvas.dot(s / 2 + jitter(rng, 2), y, 2);
            DraftProblem {
                text,
                program: "Half N_0".into(),
                knowledge: ids(kb, &[&["Midpoint"]]),
                category: Category::Length,
                choices,
                answer_index,
                canvas,
            }
        }
        6 => {
            // circle area from radius
            let r = f64::from(rng.random_range(2..=10));
            let o = pick(rng, &["O", "P", "C"]);
            let rv = format_number(r);
            let text = match rng.random_range(0..2) {
                0 => format!("A circle with center {o} has radius {rv}. Find the area of the circle."),
                _ => format!("The circle in the figure has a radius of {rv}. What is its area?"),
            };
            let answer = std::f64::consts::PI * r * r;
            let (choices, answer_index) =
                make_choices(rng, answer, &[2.0 * std::f64::consts::PI * r, r * r, answer / 2.0]);
            let cr = s / 3 + jitter(rng, 3);
            canvas.circle(s / 2, s / 2, cr);
            canvas.line(s / 2, s / 2, s / 2 + cr, s / 2);
            canvas.dot(s / 2, s / 2, 1);
            DraftProblem {
                text,
                program: "Square N_0 ; Mul C_5 V_0".into(),
                knowledge: ids(kb, &[&["Circle Area"], &["Circle Area"]]),
                category: Category::Other,
                choices,
                answer_index,
                canvas,
            }
        }
        7 => {
            // square perimeter
            let side = f64::from(rng.random_range(3..=15));
            let sv = format_number(side);
            let text = match rng.random_range(0..2) {
                0 => format!("A square has sides of length {sv}. Find its perimeter."),
                _ => format!("Each side of the square in the figure measures {sv}. What is the perimeter of the square?"),
            };
            let answer = 4.0 * side;
            let (choices, answer_index) =
                make_choices(rng, answer, &[side * side, 2.0 * side, 3.0 * side]);
            let (x0, y0) = (s / 4 + jitter(rng, 3), s / 4 + jitter(rng, 3));
            let w = s / 2;
            canvas.line(x0, y0, x0 + w, y0);
            canvas.line(x0 + w, y0, x0 + w, y0 + w);
            canvas.line(x0 + w, y0 + w, x0, y0 + w);
            canvas.line(x0, y0 + w, x0, y0);
            DraftProblem {
                text,
                program: "Double N_0 ; Double V_0".into(),
                knowledge: ids(kb, &[&["Square Perimeter"], &["Square Perimeter"]]),
                category: Category::Length,
                choices,
                answer_index,
                canvas,
            }
        }
        8 => {
            // base angle of an isosceles triangle
            let v = f64::from(rng.random_range(2..=12) * 10);
            let vv = format_number(v);
            let text = match rng.random_range(0..2) {
                0 => format!(
                    "In the isosceles triangle shown, the vertex angle measures {vv} degrees. Find the measure of each base angle."
                ),
                _ => format!(
                    "An isosceles triangle has a vertex angle of {vv} degrees. What is the measure of one of its base angles?"
                ),
            };
            let answer = (180.0 - v) / 2.0;
            let (choices, answer_index) = make_choices(rng, answer, &[180.0 - v, v / 2.0, v]);
            let (x0, y0) = (s / 5, 4 * s / 5 + jitter(rng, 2));
            let (x1, y1) = (4 * s / 5, 4 * s / 5 + jitter(rng, 2));
            let (x2, y2) = (s / 2 + jitter(rng, 2), s / 6);
            canvas.line(x0, y0, x1, y1);
            canvas.line(x1, y1, x2, y2);
            canvas.line(x2, y2, x0, y0);
            // tick marks on the equal sides
            canvas.line((x0 + x2) / 2 - 2, (y0 + y2) / 2, (x0 + x2) / 2 + 2, (y0 + y2) / 2 - 3);
            canvas.line((x1 + x2) / 2 - 2, (y1 + y2) / 2 - 3, (x1 + x2) / 2 + 2, (y1 + y2) / 2);
            DraftProblem {
                text,
                program: "Minus C_3 N_0 ; Half V_0".into(),
                knowledge: ids(kb, &[&["Triangle Angle Sum"], &["Isosceles Triangle"]]),
                category: Category::Angle,
                choices,
                answer_index,
                canvas,
            }
        }
        9 => {
            // rectangle with doubled width
            let l = f64::from(rng.random_range(3..=12));
            let w = f64::from(rng.random_range(2..=9));
            let (lv, wv) = (format_number(l), format_number(w));
            let text = match rng.random_range(0..2) {
                0 => format!(
                    "A rectangle is {lv} units long and {wv} units wide. A second rectangle has the same length but twice the width. Find the area of the second rectangle."
                ),
                _ => format!(
                    "The rectangle in the figure measures {lv} by {wv}. Doubling its width gives a new rectangle. What is the area of the new rectangle?"
                ),
            };
            let answer = 2.0 * l * w;
            let (choices, answer_index) =
                make_choices(rng, answer, &[l * w, 2.0 * (l + w), 4.0 * l * w]);
            let (x0, y0) = (s / 6, s / 3 + jitter(rng, 3));
            let (rw, rh) = (2 * s / 3, s / 4);
            canvas.line(x0, y0, x0 + rw, y0);
            canvas.line(x0 + rw, y0, x0 + rw, y0 + rh);
            canvas.line(x0 + rw, y0 + rh, x0, y0 + rh);
            canvas.line(x0, y0 + rh, x0, y0);
            canvas.line(x0, y0 + rh + 3, x0 + rw, y0 + rh + 3);
            DraftProblem {
                text,
                program: "Mul N_0 N_1 ; Double V_0".into(),
                knowledge: ids(kb, &[&["Rectangle Area"], &["Rectangle Area"]]),
                category: Category::Other,
                choices,
                answer_index,
                canvas,
            }
        }
        10 => {
            // opposite leg via the tangent ratio
            let theta = f64::from(rng.random_range(6..=12) * 5);
            let a = f64::from(rng.random_range(4..=12));
            let (tv, av) = (format_number(theta), format_number(a));
            let text = match rng.random_range(0..2) {
                0 => format!(
                    "In a right triangle, one acute angle measures {tv} degrees and the leg adjacent to it has length {av}. Find the length of the leg opposite that angle."
                ),
                _ => format!(
                    "The right triangle shown has an acute angle of {tv} degrees whose adjacent leg measures {av}. How long is the opposite leg?"
                ),
            };
            let answer = theta.to_radians().tan() * a;
            let (choices, answer_index) = make_choices(
                rng,
                answer,
                &[a / theta.to_radians().tan(), a * theta.to_radians().sin(), a],
            );
            draw_right_triangle(&mut canvas, rng, s);
            canvas.arc(s / 5 + 2, 4 * s / 5 - 2, s / 8, 0.0, 45.0);
            DraftProblem {
                text,
                program: "TanDeg N_0 ; Mul V_0 N_1".into(),
                knowledge: ids(kb, &[&["Tangent Ratio"], &["Tangent Ratio"]]),
                category: Category::Length,
                choices,
                answer_index,
                canvas,
            }
        }
        11 => {
            // area of a circle inscribed in a square
            let side = f64::from(rng.random_range(2..=8) * 2);
            let sv = format_number(side);
            let text = match rng.random_range(0..2) {
                0 => format!(
                    "A circle is inscribed in a square with sides of length {sv}. Find the area of the circle."
                ),
                _ => format!(
                    "The figure shows a circle inscribed in a square whose side measures {sv}. What is the area of the circle?"
                ),
            };
            let r = side / 2.0;
            let answer = std::f64::consts::PI * r * r;
            let (choices, answer_index) = make_choices(
                rng,
                answer,
                &[side * side, std::f64::consts::PI * side * side, 2.0 * std::f64::consts::PI * r],
            );
            let (x0, y0) = (s / 5, s / 5);
            let w = 3 * s / 5;
            canvas.line(x0, y0, x0 + w, y0);
            canvas.line(x0 + w, y0, x0 + w, y0 + w);
            canvas.line(x0 + w, y0 + w, x0, y0 + w);
            canvas.line(x0, y0 + w, x0, y0);
            canvas.circle(x0 + w / 2, y0 + w / 2, w / 2 - 1);
            DraftProblem {
                text,
                program: "Half N_0 ; Square V_0 ; Mul C_5 V_1".into(),
                knowledge: ids(
                    kb,
                    &[&["Radius and Diameter"], &["Circle Area"], &["Circle Area"]],
                ),
                category: Category::Other,
                choices,
                answer_index,
                canvas,
            }
        }
        12 => marked_angle(rng, kb, image_size, 0),
        13 => marked_angle(rng, kb, image_size, 1),
        14 => marked_angle(rng, kb, image_size, 2),
        15 => third_angle(rng, kb, image_size, 0),
        16 => third_angle(rng, kb, image_size, 1),
        17 => third_side(rng, kb, image_size, 0),
        18 => third_side(rng, kb, image_size, 1),
        19 => circle_area(rng, kb, image_size, 0),
        _ => circle_area(rng, kb, image_size, 1),
    }
}

/// One marked angle and one unknown angle at the same point. The same text
/// pairs with three diagrams: a ray standing on a straight line
/// (supplementary), a ray splitting a right-angle corner (complementary) or
/// two crossing lines (vertical).
fn marked_angle(
    rng: &mut ChaCha8Rng,
    kb: &KnowledgeBase,
    image_size: usize,
    variant: usize,
) -> DraftProblem {
    let s = image_size as i64;
    let mut canvas = Canvas::new(image_size);
    let x = f64::from(rng.random_range(25..=40));
    let p = pick(rng, &["O", "G", "H"]);
    let xs = format_number(x);
    let text = match rng.random_range(0..2) {
        0 => format!(
            "In the figure, the angle marked at point {p} measures {xs} degrees. What is the measure of the angle marked with the question mark?"
        ),
        _ => format!(
            "The figure shows a marked angle of {xs} degrees at point {p}. Find the measure of the angle labeled with the question mark."
        ),
    };
    let (answer, candidates, program, knowledge) = match variant {
        0 => (
            180.0 - x,
            [90.0 - x, x, x / 2.0],
            "Minus C_3 N_0",
            ids(kb, &[&["Supplementary Angles"]]),
        ),
        1 => (
            90.0 - x,
            [180.0 - x, x, x + 90.0],
            "Minus C_2 N_0",
            ids(kb, &[&["Complementary Angles"]]),
        ),
        _ => (
            x,
            [180.0 - x, 90.0 - x, 2.0 * x],
            "Double N_0 ; Half V_0",
            ids(kb, &[&["Vertical Angles"], &["Vertical Angles"]]),
        ),
    };
    let (choices, answer_index) = make_choices(rng, answer, &candidates);
    match variant {
        0 => {
            // one ray standing on a straight line
            let y = s / 2 + jitter(rng, 2);
            let px = s / 2 + jitter(rng, 2);
            canvas.line(2, y, s - 3, y);
            canvas.line(px, y, px + 2 * s / 5, y - 2 * s / 5);
            canvas.dot(px, y, 1);
            canvas.arc(px, y, s / 9, 0.0, 45.0);
            canvas.arc(px, y, s / 7, 135.0, 180.0);
        }
        1 => {
            // right-angle corner split by a ray
            let cx = s / 4 + jitter(rng, 2);
            let cy = 3 * s / 4 + jitter(rng, 2);
            canvas.line(cx, cy, s - 3, cy);
            canvas.line(cx, cy, cx, s / 6);
            canvas.line(cx + s / 10, cy, cx + s / 10, cy - s / 10);
            canvas.line(cx, cy - s / 10, cx + s / 10, cy - s / 10);
            canvas.line(cx, cy, cx + s / 2, cy - 2 * s / 5);
            canvas.arc(cx, cy, s / 8, 0.0, 38.0);
            canvas.arc(cx, cy, s / 6, 45.0, 90.0);
        }
        _ => {
            // two crossing lines
            let cx = s / 2 + jitter(rng, 2);
            let cy = s / 2 + jitter(rng, 2);
            let d = 2 * s / 5;
            canvas.line(cx - d, cy - d, cx + d, cy + d);
            canvas.line(cx - d, cy + d, cx + d, cy - d);
            canvas.dot(cx, cy, 1);
            canvas.arc(cx, cy, s / 8, -35.0, 35.0);
            canvas.arc(cx, cy, s / 8, 145.0, 215.0);
        }
    }
    DraftProblem {
        text,
        program: program.into(),
        knowledge,
        category: Category::Angle,
        choices,
        answer_index,
        canvas,
    }
}

/// Two marked interior angles of a triangle and one unknown angle at the
/// third vertex. A closed triangle asks for the interior angle there; a
/// triangle with one side extended asks for the exterior angle, which equals
/// the sum of the two marked ones.
fn third_angle(
    rng: &mut ChaCha8Rng,
    kb: &KnowledgeBase,
    image_size: usize,
    variant: usize,
) -> DraftProblem {
    let s = image_size as i64;
    let mut canvas = Canvas::new(image_size);
    let a = f64::from(rng.random_range(45..=70));
    let b = f64::from(rng.random_range(46..=70));
    let (pa, pb, pc) = pick3(rng, &UPPER);
    let (av, bv) = (format_number(a), format_number(b));
    let text = match rng.random_range(0..2) {
        0 => format!(
            "In triangle {pa}{pb}{pc}, the two marked interior angles measure {av} and {bv} degrees. Find the measure of the angle marked with the question mark."
        ),
        _ => format!(
            "Two marked interior angles of the triangle shown measure {av} degrees and {bv} degrees. What is the measure of the angle marked with the question mark?"
        ),
    };
    let (answer, other) =
        if variant == 0 { (180.0 - (a + b), a + b) } else { (a + b, 180.0 - (a + b)) };
    let (choices, answer_index) = make_choices(rng, answer, &[other, a, b]);
    let y0 = 3 * s / 4 + jitter(rng, 2);
    if variant == 0 {
        // closed triangle, unknown angle inside at the apex
        let x0 = s / 6 + jitter(rng, 2);
        let x1 = 5 * s / 6 + jitter(rng, 2);
        let (ax, ay) = (s / 2 + jitter(rng, 2), s / 5 + jitter(rng, 2));
        canvas.line(x0, y0, x1, y0);
        canvas.line(x0, y0, ax, ay);
        canvas.line(x1, y0, ax, ay);
        canvas.arc(x0, y0, s / 8, 0.0, 50.0);
        canvas.arc(x1, y0, s / 8, 130.0, 180.0);
        canvas.arc(ax, ay, s / 8, 240.0, 300.0);
    } else {
        // one side extended past the third vertex, unknown angle outside
        let x0 = s / 6 + jitter(rng, 2);
        let x1 = 3 * s / 5 + jitter(rng, 2);
        let (ax, ay) = (s / 3 + jitter(rng, 2), s / 4 + jitter(rng, 2));
        canvas.line(x0, y0, x1, y0);
        canvas.line(x1, y0, s - 2, y0);
        canvas.line(x0, y0, ax, ay);
        canvas.line(x1, y0, ax, ay);
        canvas.arc(x0, y0, s / 8, 0.0, 50.0);
        canvas.arc(ax, ay, s / 8, 250.0, 310.0);
        canvas.arc(x1, y0, s / 7, 0.0, 110.0);
    }
    DraftProblem {
        text,
        program: if variant == 0 { "Add N_0 N_1 ; Minus C_3 V_0" } else { "Add N_0 N_1" }.into(),
        knowledge: if variant == 0 {
            ids(kb, &[&["Triangle Angle Sum"], &["Triangle Angle Sum"]])
        } else {
            ids(kb, &[&["Exterior Angle"]])
        },
        category: Category::Angle,
        choices,
        answer_index,
        canvas,
    }
}

/// A right triangle with two labeled sides and one unknown side. Ticks on the
/// two legs ask for the hypotenuse; a tick on the horizontal hypotenuse and
/// one slanted leg asks for the remaining leg. The longer side comes first in
/// the text, so both readings execute on the same bindings.
fn third_side(
    rng: &mut ChaCha8Rng,
    kb: &KnowledgeBase,
    image_size: usize,
    variant: usize,
) -> DraftProblem {
    let s = image_size as i64;
    let mut canvas = Canvas::new(image_size);
    let u = f64::from(rng.random_range(8..=13));
    let v = f64::from(rng.random_range(3..=7));
    let (uv, vv) = (format_number(u), format_number(v));
    let text = match rng.random_range(0..2) {
        0 => format!(
            "The right triangle in the figure has two labeled sides of length {uv} and {vv}. Find the length of the third side."
        ),
        _ => format!(
            "Two sides of the right triangle shown are labeled {uv} and {vv}. What is the length of the remaining side?"
        ),
    };
    let hyp = (u * u + v * v).sqrt();
    let leg = (u * u - v * v).sqrt();
    let (answer, other) = if variant == 0 { (hyp, leg) } else { (leg, hyp) };
    let (choices, answer_index) = make_choices(rng, answer, &[other, u + v, u]);
    if variant == 0 {
        // legs axis-aligned, right angle at the bottom right, ticks on the legs
        let (x0, y0) = (s / 5 + jitter(rng, 2), 4 * s / 5 + jitter(rng, 2));
        let x1 = 4 * s / 5 + jitter(rng, 2);
        let yt = s / 5 + jitter(rng, 2);
        canvas.line(x0, y0, x1, y0);
        canvas.line(x1, y0, x1, yt);
        canvas.line(x1, yt, x0, y0);
        canvas.line(x1 - s / 12, y0, x1 - s / 12, y0 - s / 12);
        canvas.line(x1 - s / 12, y0 - s / 12, x1, y0 - s / 12);
        canvas.dot((x0 + x1) / 2, y0, 1);
        canvas.dot(x1, (y0 + yt) / 2, 1);
    } else {
        // hypotenuse horizontal at the bottom, right angle at the apex, ticks
        // on the hypotenuse and one slanted leg
        let (x0, y0) = (s / 6 + jitter(rng, 2), 3 * s / 4 + jitter(rng, 2));
        let x1 = 5 * s / 6 + jitter(rng, 2);
        let (ax, ay) = (s / 2 + jitter(rng, 2), s / 4 + jitter(rng, 2));
        canvas.line(x0, y0, x1, y0);
        canvas.line(x0, y0, ax, ay);
        canvas.line(x1, y0, ax, ay);
        canvas.line(ax - s / 14, ay + s / 14, ax + s / 14, ay + s / 14);
        canvas.line(ax - s / 14, ay, ax - s / 14, ay + s / 14);
        canvas.line(ax + s / 14, ay, ax + s / 14, ay + s / 14);
        canvas.dot((x0 + x1) / 2, y0, 1);
        canvas.dot((x0 + ax) / 2, (y0 + ay) / 2, 1);
    }
    DraftProblem {
        text,
        program: if variant == 0 { "PythHyp N_0 N_1" } else { "PythLeg N_0 N_1" }.into(),
        knowledge: ids(kb, &[&["Pythagorean Theorem"]]),
        category: Category::Length,
        choices,
        answer_index,
        canvas,
    }
}

/// A circle with one marked segment. A spoke from the center marks a radius;
/// a chord through the center marks a diameter. Both variants ask for the
/// area.
fn circle_area(
    rng: &mut ChaCha8Rng,
    kb: &KnowledgeBase,
    image_size: usize,
    variant: usize,
) -> DraftProblem {
    let s = image_size as i64;
    let mut canvas = Canvas::new(image_size);
    let m = f64::from(rng.random_range(2..=9));
    let mv = format_number(m);
    let text = match rng.random_range(0..2) {
        0 => format!(
            "The marked segment of the circle in the figure measures {mv}. Find the area of the circle."
        ),
        _ => format!(
            "In the figure, the segment marked on the circle has length {mv}. What is the area of the circle?"
        ),
    };
    let full = std::f64::consts::PI * m * m;
    let quarter = full / 4.0;
    let (answer, candidates) = if variant == 0 {
        (full, [quarter, 2.0 * std::f64::consts::PI * m, m * m])
    } else {
        (quarter, [full, std::f64::consts::PI * m, m * m])
    };
    let (choices, answer_index) = make_choices(rng, answer, &candidates);
    let cx = s / 2 + jitter(rng, 2);
    let cy = s / 2 + jitter(rng, 2);
    let r = s / 3 + jitter(rng, 1);
    canvas.circle(cx, cy, r);
    canvas.dot(cx, cy, 1);
    if variant == 0 {
        // spoke from the center to the rim
        canvas.line(cx, cy, cx + 7 * r / 10, cy - 7 * r / 10);
    } else {
        // chord through the center
        canvas.line(cx - r, cy, cx + r, cy);
    }
    DraftProblem {
        text,
        program: if variant == 0 {
            "Square N_0 ; Mul C_5 V_0"
        } else {
            "Half N_0 ; Square V_0 ; Mul C_5 V_1"
        }
        .into(),
        knowledge: if variant == 0 {
            ids(kb, &[&["Circle Area"], &["Circle Area"]])
        } else {
            ids(kb, &[&["Radius and Diameter"], &["Circle Area"], &["Circle Area"]])
        },
        category: Category::Other,
        choices,
        answer_index,
        canvas,
    }
}

fn draw_right_triangle(canvas: &mut Canvas, rng: &mut ChaCha8Rng, s: i64) {
    let (x0, y0) = (s / 5 + jitter(rng, 2), 4 * s / 5 + jitter(rng, 2));
    let (x1, y1) = (4 * s / 5 + jitter(rng, 2), y0);
    let (x2, y2) = (x1, s / 5 + jitter(rng, 2));
    canvas.line(x0, y0, x1, y1);
    canvas.line(x1, y1, x2, y2);
    canvas.line(x2, y2, x0, y0);
    // right-angle marker
    canvas.line(x1 - s / 12, y1, x1 - s / 12, y1 - s / 12);
    canvas.line(x1 - s / 12, y1 - s / 12, x1, y1 - s / 12);
}
