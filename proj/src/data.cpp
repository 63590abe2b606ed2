#include "pointseg/data.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>

#include "pointseg/io.hpp"

namespace pointseg {

namespace {

std::mt19937_64 stream_for(std::uint64_t seed, std::uint64_t index) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
    return std::mt19937_64(seq);
}

int channel_distance(Rgb a, Rgb b) { return std::abs(a.r - b.r) + std::abs(a.g - b.g) + std::abs(a.b - b.b); }

struct Ellipse {
    double cx, cy;
    double a, b;  // semi-axes
    double theta;

    // Normalized radius: <= 1 inside.
    double rho2(double x, double y) const {
        const double dx = x - cx, dy = y - cy;
        const double u = (dx * std::cos(theta) + dy * std::sin(theta)) / a;
        const double v = (-dx * std::sin(theta) + dy * std::cos(theta)) / b;
        return u * u + v * v;
    }
};

// Keeps only instances whose point survived and renumbers them in point order.
InstanceMask relabel_by_points(const InstanceMask& old_mask, const std::vector<int>& old_ids) {
    std::map<int, int> remap;
    for (std::size_t i = 0; i < old_ids.size(); ++i) remap[old_ids[i]] = static_cast<int>(i) + 1;
    InstanceMask out(old_mask.dims(), 0);
    for (std::size_t p = 0; p < old_mask.size(); ++p) {
        const auto it = remap.find(old_mask[p]);
        if (old_mask[p] != 0 && it != remap.end()) out[p] = it->second;
    }
    return out;
}

Rgb bilinear(const ImageRGB& img, double x, double y, Rgb fill) {
    const int x0 = static_cast<int>(std::floor(x)), y0 = static_cast<int>(std::floor(y));
    const double fx = x - x0, fy = y - y0;
    std::array<double, 3> acc{};
    double wsum = 0.0;
    for (int dy = 0; dy <= 1; ++dy) {
        for (int dx = 0; dx <= 1; ++dx) {
            const double w = (dx ? fx : 1.0 - fx) * (dy ? fy : 1.0 - fy);
            if (w == 0.0) continue;
            const Rgb px = img.dims().contains(y0 + dy, x0 + dx) ? img(y0 + dy, x0 + dx) : fill;
            acc[0] += w * px.r;
            acc[1] += w * px.g;
            acc[2] += w * px.b;
            wsum += w;
        }
    }
    auto to8 = [&](double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v / wsum), 0L, 255L)); };
    return {to8(acc[0]), to8(acc[1]), to8(acc[2])};
}

// Geometric map between source and destination pixel coordinates (pixel centres at integers).
struct Mapping {
    Dims out;
    std::array<double, 6> fwd;  // source -> destination
    std::array<double, 6> inv;  // destination -> source
    bool exact = false;         // integer-to-integer permutation/crop
};

std::array<double, 6> invert(const std::array<double, 6>& m) {
    const double det = m[0] * m[4] - m[1] * m[3];
    if (std::abs(det) < 1e-12) throw Error("affine matrix is singular");
    const double a = m[4] / det, b = -m[1] / det, d = -m[3] / det, e = m[0] / det;
    return {a, b, -(a * m[2] + b * m[5]), d, e, -(d * m[2] + e * m[5])};
}

Mapping mapping_for(const AugmentOp& op, Dims in) {
    const double W = in.width, H = in.height;
    switch (op.kind) {
        case AugmentOp::Kind::HFlip: return {in, {-1, 0, W - 1, 0, 1, 0}, {-1, 0, W - 1, 0, 1, 0}, true};
        case AugmentOp::Kind::VFlip: return {in, {1, 0, 0, 0, -1, H - 1}, {1, 0, 0, 0, -1, H - 1}, true};
        case AugmentOp::Kind::Rotate90: {
            // One quarter turn: (x, y) -> (y, W - 1 - x), output is W rows by H columns.
            Mapping m{in, {1, 0, 0, 0, 1, 0}, {1, 0, 0, 0, 1, 0}, true};
            const int k = ((op.quarter_turns % 4) + 4) % 4;
            Dims cur = in;
            for (int t = 0; t < k; ++t) {
                const std::array<double, 6> step{0, 1, 0, -1, 0, static_cast<double>(cur.width) - 1};
                const auto& f = m.fwd;
                m.fwd = {step[0] * f[0] + step[1] * f[3], step[0] * f[1] + step[1] * f[4],
                         step[0] * f[2] + step[1] * f[5] + step[2], step[3] * f[0] + step[4] * f[3],
                         step[3] * f[1] + step[4] * f[4], step[3] * f[2] + step[4] * f[5] + step[5]};
                cur = {cur.width, cur.height};
            }
            m.out = cur;
            m.inv = invert(m.fwd);
            return m;
        }
        case AugmentOp::Kind::Resize: {
            if (!(op.scale > 0.0)) throw Error("resize scale must be > 0");
            const double s = op.scale;
            Dims out{static_cast<int>(std::lround(H * s)), static_cast<int>(std::lround(W * s))};
            const double off = 0.5 * s - 0.5;
            const std::array<double, 6> fwd{s, 0, off, 0, s, off};
            return {out, fwd, invert(fwd), s == 1.0};
        }
        case AugmentOp::Kind::Affine: return {in, op.matrix, invert(op.matrix), false};
        case AugmentOp::Kind::Crop: {
            const Rect& r = op.rect;
            if (r.x < 0 || r.y < 0 || r.width <= 0 || r.height <= 0 || r.x + r.width > in.width ||
                r.y + r.height > in.height) {
                throw Error("crop rectangle outside image");
            }
            const double x0 = r.x, y0 = r.y;
            return {{r.height, r.width}, {1, 0, -x0, 0, 1, -y0}, {1, 0, x0, 0, 1, y0}, true};
        }
    }
    throw Error("unknown augmentation");
}

}  // namespace

void SynthSpec::validate() const {
    if (dims.height < 8 || dims.width < 8) throw Error("synth dims must be at least 8x8");
    if (images < 1) throw Error("synth images must be >= 1");
    if (min_cells < 0 || max_cells < min_cells) throw Error("synth cell count range invalid");
    if (min_radius < 2.0 || max_radius < min_radius) throw Error("synth radii must be >= 2 px and ordered");
    if (min_eccentricity < 0.0 || max_eccentricity >= 1.0 || max_eccentricity < min_eccentricity) {
        throw Error("synth eccentricity range must lie in [0, 1)");
    }
    if (class_weights[0] < 0 || class_weights[1] < 0 || class_weights[2] < 0 ||
        class_weights[0] + class_weights[1] + class_weights[2] <= 0) {
        throw Error("synth class weights must be non-negative and not all zero");
    }
    if (channel_distance(strong_positive, background) < min_contrast ||
        channel_distance(negative, background) < min_contrast) {
        throw Error("synth palette colours too close to background");
    }
    if (cluster_tightness < 0.0 || cluster_tightness > 1.0) throw Error("cluster_tightness must be in [0, 1]");
    if (noise_sigma < 0.0 || contrast_jitter < 0.0 || contrast_jitter >= 1.0) throw Error("synth noise/jitter invalid");
}

std::vector<Sample> generate_synthetic(const SynthSpec& spec) {
    spec.validate();
    std::vector<Sample> out;
    out.reserve(static_cast<std::size_t>(spec.images));
    const Rgb palette[3] = {spec.strong_positive, spec.weak_positive, spec.negative};

    for (int n = 0; n < spec.images; ++n) {
        std::mt19937_64 rng = stream_for(spec.seed, static_cast<std::uint64_t>(n));
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        std::uniform_int_distribution<int> count_dist(spec.min_cells, spec.max_cells);
        std::discrete_distribution<int> class_dist(spec.class_weights.begin(), spec.class_weights.end());
        const int target = count_dist(rng);

        const Dims dims = spec.dims;
        InstanceMask mask(dims, 0);
        std::vector<Ellipse> cells;
        std::vector<int> classes;

        for (int k = 0; k < target; ++k) {
            bool placed = false;
            for (int attempt = 0; attempt < spec.max_retries && !placed; ++attempt) {
                const double radius = spec.min_radius + (spec.max_radius - spec.min_radius) * unit(rng);
                const double ecc = spec.min_eccentricity + (spec.max_eccentricity - spec.min_eccentricity) * unit(rng);
                const double minor_ratio = std::sqrt(1.0 - ecc * ecc);
                // Keep the mean semi-axis equal to `radius`.
                const double a = 2.0 * radius / (1.0 + minor_ratio);
                const double b = a * minor_ratio;
                const double theta = std::numbers::pi * unit(rng);
                double cx, cy;
                if (!cells.empty() && unit(rng) < spec.cluster_tightness) {
                    const Ellipse& nb = cells[static_cast<std::size_t>(unit(rng) * cells.size()) % cells.size()];
                    const double phi = 2.0 * std::numbers::pi * unit(rng);
                    const double gap = 0.5 * (nb.a + nb.b) + radius + 0.5 + unit(rng);
                    cx = nb.cx + gap * std::cos(phi);
                    cy = nb.cy + gap * std::sin(phi);
                } else {
                    cx = a + 1.0 + (dims.width - 2.0 * a - 3.0) * unit(rng);
                    cy = a + 1.0 + (dims.height - 2.0 * a - 3.0) * unit(rng);
                }
                if (cx - a < 1.0 || cy - a < 1.0 || cx + a > dims.width - 2.0 || cy + a > dims.height - 2.0) continue;
                const Ellipse e{cx, cy, a, b, theta};
                const int r0 = static_cast<int>(std::floor(cy - a)), r1 = static_cast<int>(std::ceil(cy + a));
                const int c0 = static_cast<int>(std::floor(cx - a)), c1 = static_cast<int>(std::ceil(cx + a));
                std::vector<std::size_t> pixels;
                bool clash = false;
                for (int r = r0; r <= r1 && !clash; ++r) {
                    for (int c = c0; c <= c1; ++c) {
                        if (!dims.contains(r, c) || e.rho2(c, r) > 1.0) continue;
                        if (mask(r, c) != 0) {
                            clash = true;
                            break;
                        }
                        pixels.push_back(mask.index(r, c));
                    }
                }
                if (clash || pixels.size() < 9) continue;
                const int id = static_cast<int>(cells.size()) + 1;
                for (const std::size_t p : pixels) mask[p] = id;
                cells.push_back(e);
                classes.push_back(class_dist(rng));
                placed = true;
            }
            if (!placed) {
                std::ostringstream msg;
                msg << "synthetic image " << n << ": placed " << cells.size() << " of " << target
                    << " cells; cell " << k << " failed after " << spec.max_retries << " retries";
                throw Error(msg.str());
            }
        }

        // Render: background, cells with a lighter rim, then Gaussian pixel noise.
        std::normal_distribution<double> noise(0.0, spec.noise_sigma);
        std::vector<double> gain(cells.size());
        for (std::size_t i = 0; i < cells.size(); ++i) {
            gain[i] = 1.0 + spec.contrast_jitter * (2.0 * unit(rng) - 1.0);
        }
        Sample s;
        s.image = ImageRGB(dims);
        for (int r = 0; r < dims.height; ++r) {
            for (int c = 0; c < dims.width; ++c) {
                const int id = mask(r, c);
                std::array<double, 3> bg{double(spec.background.r), double(spec.background.g), double(spec.background.b)};
                std::array<double, 3> px = bg;
                if (id > 0) {
                    const std::size_t i = static_cast<std::size_t>(id - 1);
                    const Rgb col = palette[classes[i]];
                    const double rim = 0.3 * cells[i].rho2(c, r);
                    const std::array<double, 3> fg{double(col.r), double(col.g), double(col.b)};
                    for (int ch = 0; ch < 3; ++ch) px[ch] = bg[ch] + (fg[ch] - bg[ch]) * gain[i] * (1.0 - rim);
                }
                auto q = [&](double v) {
                    return static_cast<std::uint8_t>(std::clamp(std::lround(v + noise(rng)), 0L, 255L));
                };
                const std::uint8_t R = q(px[0]);
                const std::uint8_t G = q(px[1]);
                const std::uint8_t B = q(px[2]);
                s.image(r, c) = {R, G, B};
            }
        }

        // Points at instance centroids, snapped to an instance pixel if needed.
        std::vector<double> sx(cells.size(), 0.0), sy(cells.size(), 0.0), cnt(cells.size(), 0.0);
        for (int r = 0; r < dims.height; ++r) {
            for (int c = 0; c < dims.width; ++c) {
                if (const int id = mask(r, c); id > 0) {
                    sx[static_cast<std::size_t>(id - 1)] += c;
                    sy[static_cast<std::size_t>(id - 1)] += r;
                    cnt[static_cast<std::size_t>(id - 1)] += 1.0;
                }
            }
        }
        for (std::size_t i = 0; i < cells.size(); ++i) {
            Point p{sx[i] / cnt[i], sy[i] / cnt[i], classes[i]};
            const PixelPos px = pixel_of(p, dims);
            if (mask(px.row, px.col) != static_cast<int>(i) + 1) {
                double best = std::numeric_limits<double>::infinity();
                for (int r = 0; r < dims.height; ++r) {
                    for (int c = 0; c < dims.width; ++c) {
                        const double d = std::hypot(c - p.x, r - p.y);
                        if (mask(r, c) == static_cast<int>(i) + 1 && d < best) {
                            best = d;
                            p.x = c;
                            p.y = r;
                        }
                    }
                }
            }
            s.points.push_back(p);
        }
        s.instances = std::move(mask);
        std::ostringstream id;
        id << "s" << n;
        s.id = id.str();
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<Regime> synth_regimes(const SynthSpec& base) {
    std::vector<Regime> out;
    for (const bool clustered : {false, true}) {
        for (const bool weak : {false, true}) {
            SynthSpec s = base;
            s.cluster_tightness = clustered ? std::max(base.cluster_tightness, 0.6) : 0.0;
            if (weak) {
                s.class_weights = {base.class_weights[0] * 0.5, base.class_weights[1] + 0.3, base.class_weights[2] * 0.5};
            }
            out.push_back({std::string(clustered ? "clustered" : "sparse") + "-" + (weak ? "weak" : "strong"), s});
        }
    }
    return out;
}

std::vector<Sample> generate_regime_dataset(const SynthSpec& base, int total) {
    if (total < 1) throw Error("dataset size must be >= 1");
    const std::vector<Regime> regimes = synth_regimes(base);
    std::vector<Sample> out;
    out.reserve(static_cast<std::size_t>(total));
    for (int n = 0; n < total; ++n) {
        const Regime& reg = regimes[static_cast<std::size_t>(n) % regimes.size()];
        SynthSpec s = reg.spec;
        s.images = 1;
        std::mt19937_64 rng = stream_for(base.seed, static_cast<std::uint64_t>(n));
        s.seed = rng();
        Sample sample = std::move(generate_synthetic(s).front());
        std::ostringstream id;
        id << "img" << std::setw(4) << std::setfill('0') << n;
        sample.id = id.str();
        sample.regime = reg.name;
        out.push_back(std::move(sample));
    }
    return out;
}

std::string to_string(Split s) {
    switch (s) {
        case Split::Train: return "train";
        case Split::Validation: return "val";
        case Split::Test: return "test";
    }
    return "train";
}

Split split_from_string(const std::string& s) {
    if (s == "train") return Split::Train;
    if (s == "val") return Split::Validation;
    if (s == "test") return Split::Test;
    throw Error("unknown split: " + s);
}

std::vector<Split> assign_splits(const std::vector<Sample>& samples, std::uint64_t seed) {
    std::map<std::string, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < samples.size(); ++i) groups[samples[i].regime].push_back(i);
    std::vector<Split> out(samples.size(), Split::Train);
    std::mt19937_64 rng(seed);
    for (auto& [name, members] : groups) std::shuffle(members.begin(), members.end(), rng);
    // Interleave regimes round-robin so each global quota draws evenly from every regime.
    std::vector<std::size_t> order;
    for (std::size_t k = 0; order.size() < samples.size(); ++k) {
        for (const auto& [name, members] : groups) {
            if (k < members.size()) order.push_back(members[k]);
        }
    }
    const auto quota = static_cast<std::size_t>(std::lround(0.1 * static_cast<double>(samples.size())));
    for (std::size_t k = 0; k < order.size(); ++k) {
        if (k < quota) out[order[k]] = Split::Validation;
        else if (k < 2 * quota) out[order[k]] = Split::Test;
    }
    return out;
}

PointSet parse_points_csv(const std::string& text, Dims dims, const std::string& source) {
    PointSet points;
    std::vector<int> rows;
    std::istringstream in(text);
    std::string line;
    std::ostringstream problems;
    int row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        std::vector<std::string> fields;
        std::istringstream ls(line);
        std::string f;
        while (std::getline(ls, f, ',')) fields.push_back(f);
        Point p;
        try {
            if (fields.size() < 2 || fields.size() > 3) throw std::invalid_argument("field count");
            std::size_t used = 0;
            p.x = std::stod(fields[0], &used);
            p.y = std::stod(fields[1], &used);
            if (fields.size() == 3) p.cls = std::stoi(fields[2]);
        } catch (const std::exception&) {
            if (points.empty() && row == 1) continue;  // header
            problems << "row " << row << ": malformed '" << line << "'; ";
            continue;
        }
        if (!(p.x >= 0.0 && p.y >= 0.0 && p.x < dims.width && p.y < dims.height)) {
            problems << "row " << row << ": (" << p.x << ", " << p.y << ") outside " << dims.width << "x"
                     << dims.height << "; ";
            continue;
        }
        points.push_back(p);
        rows.push_back(row);
    }
    std::map<std::pair<int, int>, int> seen;
    for (std::size_t i = 0; i < points.size(); ++i) {
        const PixelPos px = pixel_of(points[i], dims);
        auto [it, inserted] = seen.emplace(std::make_pair(px.row, px.col), rows[i]);
        if (!inserted) problems << "rows " << it->second << " and " << rows[i] << ": duplicate pixel; ";
    }
    const std::string msg = problems.str();
    if (!msg.empty()) throw Error(source + ": " + msg.substr(0, msg.size() - 2));
    return points;
}

std::vector<Sample> load_dataset(const std::vector<std::string>& image_paths,
                                 const std::vector<std::string>& point_paths) {
    if (image_paths.size() != point_paths.size()) throw Error("load_dataset: image and point path counts differ");
    std::vector<Sample> out;
    for (std::size_t i = 0; i < image_paths.size(); ++i) {
        Sample s;
        s.image = read_png_rgb(image_paths[i]);
        s.points = parse_points_csv(read_text(point_paths[i]), s.image.dims(), point_paths[i]);
        s.id = image_paths[i];
        s.regime = "file";
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<Sample> extract_patches(const Sample& sample, int size, int stride) {
    const Dims dims = sample.image.dims();
    if (size < 1 || stride < 1) throw Error("patch size and stride must be >= 1");
    if (size > dims.height || size > dims.width) throw Error("patch size exceeds image");
    std::vector<Sample> out;
    for (int y0 = 0; y0 + size <= dims.height; y0 += stride) {
        for (int x0 = 0; x0 + size <= dims.width; x0 += stride) {
            Sample p;
            std::ostringstream id;
            id << sample.id << "_y" << y0 << "_x" << x0;
            p.id = id.str();
            p.regime = sample.regime;
            p.image = ImageRGB(size, size);
            for (int r = 0; r < size; ++r) {
                for (int c = 0; c < size; ++c) p.image(r, c) = sample.image(y0 + r, x0 + c);
            }
            std::vector<int> kept_ids;
            for (std::size_t i = 0; i < sample.points.size(); ++i) {
                const PixelPos px = pixel_of(sample.points[i], dims);
                if (px.row < y0 || px.row >= y0 + size || px.col < x0 || px.col >= x0 + size) continue;
                Point q = sample.points[i];
                q.x -= x0;
                q.y -= y0;
                q.x = std::clamp(q.x, 0.0, std::nextafter(static_cast<double>(size), 0.0));
                q.y = std::clamp(q.y, 0.0, std::nextafter(static_cast<double>(size), 0.0));
                p.points.push_back(q);
                kept_ids.push_back(static_cast<int>(i) + 1);
            }
            if (sample.instances) {
                InstanceMask crop(size, size, 0);
                for (int r = 0; r < size; ++r) {
                    for (int c = 0; c < size; ++c) crop(r, c) = (*sample.instances)(y0 + r, x0 + c);
                }
                p.instances = relabel_by_points(crop, kept_ids);
            }
            out.push_back(std::move(p));
        }
    }
    return out;
}

Augmented augment_sample(const Sample& sample, const std::vector<AugmentOp>& ops) {
    Augmented result{sample, 0};
    Sample& s = result.sample;
    // Original instance id carried by each surviving point.
    std::vector<int> ids(s.points.size());
    std::iota(ids.begin(), ids.end(), 1);

    for (const AugmentOp& op : ops) {
        const Dims in = s.image.dims();
        const Mapping m = mapping_for(op, in);
        if (m.out.height < 1 || m.out.width < 1) throw Error("augmentation produced an empty image");

        ImageRGB image(m.out);
        std::optional<InstanceMask> inst;
        if (s.instances) inst = InstanceMask(m.out, 0);
        const Rgb fill = s.image.empty() ? Rgb{} : s.image(0, 0);
        for (int r = 0; r < m.out.height; ++r) {
            for (int c = 0; c < m.out.width; ++c) {
                const double sx = m.inv[0] * c + m.inv[1] * r + m.inv[2];
                const double sy = m.inv[3] * c + m.inv[4] * r + m.inv[5];
                const int nx = static_cast<int>(std::lround(sx)), ny = static_cast<int>(std::lround(sy));
                const bool inside = in.contains(ny, nx);
                if (m.exact) {
                    if (inside) image(r, c) = s.image(ny, nx);
                } else {
                    image(r, c) = bilinear(s.image, sx, sy, fill);
                }
                if (inst && inside) (*inst)(r, c) = (*s.instances)(ny, nx);
            }
        }

        PointSet points;
        std::vector<int> kept;
        for (std::size_t i = 0; i < s.points.size(); ++i) {
            Point p = s.points[i];
            const double x = m.fwd[0] * p.x + m.fwd[1] * p.y + m.fwd[2];
            const double y = m.fwd[3] * p.x + m.fwd[4] * p.y + m.fwd[5];
            if (!(x >= 0.0 && y >= 0.0 && x < m.out.width && y < m.out.height)) {
                ++result.dropped_points;
                continue;
            }
            p.x = x;
            p.y = y;
            points.push_back(p);
            kept.push_back(ids[i]);
        }
        s.image = std::move(image);
        s.points = std::move(points);
        if (inst) {
            // Instance ids stay original until the end; only drop the ones that lost their point.
            std::vector<int> alive = kept;
            std::sort(alive.begin(), alive.end());
            for (int& v : inst->data()) {
                if (v != 0 && !std::binary_search(alive.begin(), alive.end(), v)) v = 0;
            }
            s.instances = std::move(inst);
        }
        ids = std::move(kept);
    }
    if (s.instances) s.instances = relabel_by_points(*s.instances, ids);
    return result;
}

std::vector<AugmentOp> random_augmentation(Dims dims, int patch, const AugmentRanges& ranges, std::uint64_t seed) {
    if (patch > dims.height || patch > dims.width) throw Error("patch larger than image");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<AugmentOp> ops;
    if (unit(rng) < 0.5) ops.push_back(AugmentOp::hflip());
    if (unit(rng) < 0.5) ops.push_back(AugmentOp::vflip());
    const int turns = static_cast<int>(unit(rng) * 4.0) % 4;
    if (turns) ops.push_back(AugmentOp::rotate90(turns));
    Dims cur = turns % 2 ? Dims{dims.width, dims.height} : dims;

    const double min_scale =
        std::max(ranges.min_scale, static_cast<double>(patch) / std::min(cur.height, cur.width));
    const double scale = min_scale + (std::max(ranges.max_scale, min_scale) - min_scale) * unit(rng);
    ops.push_back(AugmentOp::resize(scale));
    cur = {static_cast<int>(std::lround(cur.height * scale)), static_cast<int>(std::lround(cur.width * scale))};

    const double rot = (2.0 * unit(rng) - 1.0) * ranges.max_rotation_deg * std::numbers::pi / 180.0;
    const double shear = (2.0 * unit(rng) - 1.0) * ranges.max_shear_deg * std::numbers::pi / 180.0;
    // Rotation then shear about the image centre.
    const double ca = std::cos(rot), sa = std::sin(rot), sh = std::tan(shear);
    const double m0 = ca + sh * sa, m1 = -sa + sh * ca, m3 = sa, m4 = ca;
    const double cx = 0.5 * (cur.width - 1), cy = 0.5 * (cur.height - 1);
    ops.push_back(AugmentOp::affine({m0, m1, cx - m0 * cx - m1 * cy, m3, m4, cy - m3 * cx - m4 * cy}));

    std::uniform_int_distribution<int> ox(0, cur.width - patch), oy(0, cur.height - patch);
    ops.push_back(AugmentOp::crop({ox(rng), oy(rng), patch, patch}));
    return ops;
}

NormalizedImage apply_normalization(const ImageRGB& image, const NormStats& stats) {
    NormalizedImage out(3, image.dims());
    for (int r = 0; r < image.height(); ++r) {
        for (int c = 0; c < image.width(); ++c) {
            const Rgb px = image(r, c);
            const double v[3] = {double(px.r), double(px.g), double(px.b)};
            for (int ch = 0; ch < 3; ++ch) {
                out.at(ch, r, c) = static_cast<float>((v[ch] - stats.mean[static_cast<std::size_t>(ch)]) /
                                                      stats.std[static_cast<std::size_t>(ch)]);
            }
        }
    }
    return out;
}

Normalized normalize(const std::vector<Sample>& samples, const std::optional<NormStats>& stats) {
    Normalized out;
    if (stats) {
        out.stats = *stats;
    } else {
        if (samples.empty()) throw Error("normalize: empty dataset");
        std::array<double, 3> sum{}, sq{};
        double n = 0.0;
        for (const Sample& s : samples) {
            for (const Rgb px : s.image) {
                const double v[3] = {double(px.r), double(px.g), double(px.b)};
                for (int ch = 0; ch < 3; ++ch) sum[static_cast<std::size_t>(ch)] += v[ch];
                n += 1.0;
            }
        }
        for (std::size_t ch = 0; ch < 3; ++ch) out.stats.mean[ch] = sum[ch] / n;
        for (const Sample& s : samples) {
            for (const Rgb px : s.image) {
                const double v[3] = {double(px.r), double(px.g), double(px.b)};
                for (std::size_t ch = 0; ch < 3; ++ch) {
                    const double d = v[ch] - out.stats.mean[ch];
                    sq[ch] += d * d;
                }
            }
        }
        for (std::size_t ch = 0; ch < 3; ++ch) out.stats.std[ch] = std::sqrt(sq[ch] / n);
    }
    for (std::size_t ch = 0; ch < 3; ++ch) {
        if (!(out.stats.std[ch] > 0.0) || !std::isfinite(out.stats.std[ch])) throw Error("degenerate channel");
    }
    out.images.reserve(samples.size());
    for (const Sample& s : samples) out.images.push_back(apply_normalization(s.image, out.stats));
    return out;
}

}  // namespace pointseg
