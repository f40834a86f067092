#include "fsrlab/tasks.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "fsrlab/nn.hpp"

namespace fsrlab {

std::uint64_t fingerprint(const LabeledDataset& ds) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    auto mix = [&h](const void* p, std::size_t n) {
        const unsigned char* b = static_cast<const unsigned char*>(p);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= b[i];
            h *= 0x100000001b3ull;
        }
    };
    std::uint32_t k = std::uint32_t(ds.class_count);
    mix(&k, sizeof k);
    for (auto d : ds.inputs.shape) {
        std::uint64_t v = d;
        mix(&v, sizeof v);
    }
    mix(ds.inputs.data.data(), ds.inputs.data.size() * sizeof(float));
    mix(ds.labels.data(), ds.labels.size() * sizeof(int));
    return h;
}

std::string TransformSpec::to_string() const {
    switch (kind) {
        case Kind::Identity: return "identity";
        case Kind::Permutation: return "permutation(seed=" + std::to_string(seed) + ")";
        case Kind::NonlinearMlp:
            return "nonlinear_mlp(seed=" + std::to_string(seed) +
                   ",alpha=" + std::to_string(alpha) + ")";
        case Kind::ColorSpace: return "color_space(" + color_space + ")";
    }
    return "?";
}

// --- IDX -------------------------------------------------------------------

namespace {

std::uint32_t read_be32(std::istream& in, const std::string& path) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw Error(path + ": truncated header");
    return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
           (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

void write_be32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4] = {(unsigned char)(v >> 24), (unsigned char)(v >> 16),
                          (unsigned char)(v >> 8), (unsigned char)v};
    out.write(reinterpret_cast<char*>(b), 4);
}

} // namespace

LabeledDataset load_idx(const std::string& images_path, const std::string& labels_path) {
    std::ifstream img(images_path, std::ios::binary);
    if (!img) throw Error("cannot open " + images_path);
    std::ifstream lab(labels_path, std::ios::binary);
    if (!lab) throw Error("cannot open " + labels_path);

    const std::uint32_t img_magic = read_be32(img, images_path);
    if (img_magic != 0x00000803u)
        throw Error(images_path + ": bad magic (expected 0x00000803)");
    const std::uint32_t n = read_be32(img, images_path);
    const std::uint32_t rows = read_be32(img, images_path);
    const std::uint32_t cols = read_be32(img, images_path);

    const std::uint32_t lab_magic = read_be32(lab, labels_path);
    if (lab_magic != 0x00000801u)
        throw Error(labels_path + ": bad magic (expected 0x00000801)");
    const std::uint32_t nl = read_be32(lab, labels_path);
    if (n != nl)
        throw Error("count mismatch: " + std::to_string(n) + " images vs " +
                    std::to_string(nl) + " labels");

    const std::size_t d = std::size_t(rows) * cols;
    std::vector<unsigned char> buf(std::size_t(n) * d);
    img.read(reinterpret_cast<char*>(buf.data()), std::streamsize(buf.size()));
    if (std::size_t(img.gcount()) != buf.size()) throw Error(images_path + ": truncated data");
    std::vector<unsigned char> lbuf(n);
    lab.read(reinterpret_cast<char*>(lbuf.data()), std::streamsize(lbuf.size()));
    if (std::size_t(lab.gcount()) != lbuf.size()) throw Error(labels_path + ": truncated data");

    LabeledDataset ds;
    ds.inputs = Tensor::zeros({n, d});
    for (std::size_t i = 0; i < buf.size(); ++i) ds.inputs.data[i] = float(buf[i]) / 255.0f;
    ds.labels.resize(n);
    int kmax = 0;
    for (std::size_t i = 0; i < n; ++i) {
        ds.labels[i] = int(lbuf[i]);
        kmax = std::max(kmax, ds.labels[i]);
    }
    ds.class_count = kmax + 1;
    ds.provenance = "idx:" + images_path;
    return ds;
}

void write_idx(const LabeledDataset& ds, std::size_t rows, std::size_t cols,
               const std::string& images_path, const std::string& labels_path) {
    if (rows * cols != ds.input_dim())
        throw Error("write_idx: " + std::to_string(rows) + "x" + std::to_string(cols) +
                    " does not match input dim " + std::to_string(ds.input_dim()));
    std::ofstream img(images_path, std::ios::binary);
    if (!img) throw Error("cannot write " + images_path);
    write_be32(img, 0x00000803u);
    write_be32(img, std::uint32_t(ds.size()));
    write_be32(img, std::uint32_t(rows));
    write_be32(img, std::uint32_t(cols));
    for (float v : ds.inputs.data) {
        const int q = int(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
        const unsigned char b = (unsigned char)q;
        img.write(reinterpret_cast<const char*>(&b), 1);
    }
    std::ofstream lab(labels_path, std::ios::binary);
    if (!lab) throw Error("cannot write " + labels_path);
    write_be32(lab, 0x00000801u);
    write_be32(lab, std::uint32_t(ds.size()));
    for (int y : ds.labels) {
        const unsigned char b = (unsigned char)y;
        lab.write(reinterpret_cast<const char*>(&b), 1);
    }
}

LabeledDataset load_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path);
    std::vector<float> values;
    std::vector<int> labels;
    std::size_t d = 0;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::vector<float> row;
        while (std::getline(ss, cell, ',')) row.push_back(std::stof(cell));
        if (row.size() < 2) throw Error(path + ":" + std::to_string(lineno) + ": short row");
        if (d == 0)
            d = row.size() - 1;
        else if (row.size() - 1 != d)
            throw Error(path + ":" + std::to_string(lineno) + ": expected " + std::to_string(d) +
                        " values, got " + std::to_string(row.size() - 1));
        labels.push_back(int(row[0]));
        values.insert(values.end(), row.begin() + 1, row.end());
    }
    LabeledDataset ds;
    ds.inputs.shape = {labels.size(), d};
    ds.inputs.data = std::move(values);
    ds.labels = std::move(labels);
    int kmax = 0;
    for (int y : ds.labels) kmax = std::max(kmax, y);
    ds.class_count = kmax + 1;
    ds.provenance = "csv:" + path;
    return ds;
}

// --- Permutation -------------------------------------------------------------

std::vector<std::size_t> make_permutation(std::size_t d, std::uint64_t seed) {
    std::vector<std::size_t> p(d);
    std::iota(p.begin(), p.end(), std::size_t(0));
    Rng rng = Rng(seed).stream("pixel-permutation");
    rng.shuffle(p);
    return p;
}

std::vector<std::size_t> inverse_permutation(const std::vector<std::size_t>& p) {
    std::vector<std::size_t> inv(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) inv[p[i]] = i;
    return inv;
}

LabeledDataset apply_permutation(const LabeledDataset& ds, const std::vector<std::size_t>& p) {
    const std::size_t d = ds.input_dim();
    if (p.size() != d)
        throw Error("apply_permutation: permutation size " + std::to_string(p.size()) +
                    " vs input dim " + std::to_string(d));
    LabeledDataset out = ds;
    out.inputs.shape = {ds.size(), d};
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const float* src = ds.row(i);
        float* dst = out.inputs.data.data() + i * d;
        for (std::size_t k = 0; k < d; ++k) dst[k] = src[p[k]];
    }
    out.provenance = ds.provenance + "|permuted";
    return out;
}

LabeledDataset permute_task(const LabeledDataset& ds, std::uint64_t seed) {
    return apply_permutation(ds, make_permutation(ds.input_dim(), seed));
}

// --- Nonlinear MLP transform -------------------------------------------------

NonlinearMlpTransform NonlinearMlpTransform::make(std::size_t d, std::uint64_t seed) {
    NonlinearMlpTransform t;
    Rng base(seed);
    for (int i = 0; i < 4; ++i) {
        Rng r = base.stream("nonlinear-layer", std::uint64_t(i));
        t.weights.push_back(orthogonal_init<float>(d, d, r));
    }
    return t;
}

namespace {

using RowMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

} // namespace

Tensor NonlinearMlpTransform::apply_raw(const Tensor& x) const {
    const std::size_t n = x.rows(), d = x.cols();
    Tensor cur = x;
    Tensor next = Tensor::zeros({n, d});
    for (const Tensor& w : weights) {
        Eigen::Map<const RowMat> X(cur.data.data(), Eigen::Index(n), Eigen::Index(d));
        Eigen::Map<const RowMat> W(w.data.data(), Eigen::Index(d), Eigen::Index(d));
        Eigen::Map<RowMat> Y(next.data.data(), Eigen::Index(n), Eigen::Index(d));
        Y.noalias() = X * W.transpose();
        for (auto& v : next.data) v = leaky_relu(v, alpha);
        std::swap(cur, next);
    }
    return cur;
}

Tensor NonlinearMlpTransform::invert_raw(const Tensor& y) const {
    const std::size_t n = y.rows(), d = y.cols();
    Tensor cur = y;
    Tensor next = Tensor::zeros({n, d});
    for (auto it = weights.rbegin(); it != weights.rend(); ++it) {
        for (auto& v : cur.data) v = leaky_relu_inverse(v, alpha);
        Eigen::Map<const RowMat> Y(cur.data.data(), Eigen::Index(n), Eigen::Index(d));
        Eigen::Map<const RowMat> W(it->data.data(), Eigen::Index(d), Eigen::Index(d));
        Eigen::Map<RowMat> X(next.data.data(), Eigen::Index(n), Eigen::Index(d));
        // orthogonal weights: inverse is the transpose
        X.noalias() = Y * W;
        std::swap(cur, next);
    }
    return cur;
}

MinMaxRange value_range(const Tensor& t) {
    MinMaxRange r{t.data.empty() ? 0.0f : t.data[0], t.data.empty() ? 1.0f : t.data[0]};
    for (float v : t.data) {
        r.lo = std::min(r.lo, v);
        r.hi = std::max(r.hi, v);
    }
    return r;
}

void renormalize(Tensor& t, MinMaxRange r, bool clamp) {
    const float span = r.hi - r.lo;
    if (span <= 0.0f) {
        for (auto& v : t.data) v = 0.0f;
        return;
    }
    for (auto& v : t.data) {
        v = (v - r.lo) / span;
        if (clamp) v = std::clamp(v, 0.0f, 1.0f);
    }
}

LabeledDataset nonlinear_transform_task(const LabeledDataset& ds, std::uint64_t seed) {
    auto t = NonlinearMlpTransform::make(ds.input_dim(), seed);
    LabeledDataset out = ds;
    out.inputs = t.apply_raw(ds.inputs);
    out.inputs.shape = {ds.size(), ds.input_dim()};
    renormalize(out.inputs, value_range(out.inputs), false);
    out.provenance = ds.provenance + "|nonlinear";
    return out;
}

TaskData nonlinear_transform_triple(const TaskData& t, std::uint64_t seed) {
    auto map = NonlinearMlpTransform::make(t.train.input_dim(), seed);
    TaskData out = t;
    out.train.inputs = map.apply_raw(t.train.inputs);
    const MinMaxRange r = value_range(out.train.inputs);
    renormalize(out.train.inputs, r, false);
    out.train.provenance += "|nonlinear";
    for (auto* split : {&out.val, &out.test}) {
        if (split->size() == 0) continue;
        split->inputs = map.apply_raw(split->inputs);
        renormalize(split->inputs, r, true);
        split->provenance += "|nonlinear";
    }
    return out;
}

// --- Color spaces --------------------------------------------------------

namespace {

// BT.601-derived constants, matching the conventional scikit-image values.
constexpr double kYiq[3][3] = {{0.299, 0.587, 0.114},
                               {0.59590059, -0.27455667, -0.32134392},
                               {0.21153661, -0.52273617, 0.31119955}};
constexpr double kYuv[3][3] = {{0.299, 0.587, 0.114},
                               {-0.14714119, -0.28886916, 0.43601035},
                               {0.61497538, -0.51496512, -0.10001026}};
// Beer-Lambert stain separation: inverse of the Ruifrok-Johnston H&E-DAB
// absorption matrix; optical density is log(max(v,1e-6))/log(1e-6).
constexpr double kHedFromRgb[3][3] = {
    {1.8779827368521356, -1.0076786862855642, -0.5561158181996246},
    {-0.06590806222356334, 1.1347303724996625, -0.13552179862837116},
    {-0.6019073634392891, -0.4804141884970579, 1.5735880719641926}};
constexpr double kHedLogAdjust = -13.815510557964274; // ln(1e-6)

std::array<double, 3> mat_apply(const double m[3][3], double r, double g, double b) {
    return {m[0][0] * r + m[0][1] * g + m[0][2] * b, m[1][0] * r + m[1][1] * g + m[1][2] * b,
            m[2][0] * r + m[2][1] * g + m[2][2] * b};
}

std::array<double, 3> rgb_to_hsv(double r, double g, double b) {
    const double mx = std::max({r, g, b});
    const double mn = std::min({r, g, b});
    const double delta = mx - mn;
    const double v = mx;
    const double s = mx > 0.0 ? delta / mx : 0.0;
    double h = 0.0;
    if (delta > 0.0) {
        if (mx == r)
            h = (g - b) / delta;
        else if (mx == g)
            h = (b - r) / delta + 2.0;
        else
            h = (r - g) / delta + 4.0;
        h /= 6.0;
        if (h < 0.0) h += 1.0;
    }
    return {h, s, v};
}

std::array<double, 3> rgb_to_hed(double r, double g, double b) {
    const double od[3] = {std::log(std::max(r, 1e-6)) / kHedLogAdjust,
                          std::log(std::max(g, 1e-6)) / kHedLogAdjust,
                          std::log(std::max(b, 1e-6)) / kHedLogAdjust};
    std::array<double, 3> s;
    for (int k = 0; k < 3; ++k) {
        // stains = od-vector times conversion matrix (column k), clamped at 0
        s[std::size_t(k)] = std::max(
            od[0] * kHedFromRgb[0][k] + od[1] * kHedFromRgb[1][k] + od[2] * kHedFromRgb[2][k],
            0.0);
    }
    return s;
}

std::array<std::array<double, 2>, 3> matrix_ranges(const double m[3][3]) {
    std::array<std::array<double, 2>, 3> r;
    for (int i = 0; i < 3; ++i) {
        double lo = 0.0, hi = 0.0;
        for (int j = 0; j < 3; ++j) {
            lo += std::min(m[i][j], 0.0);
            hi += std::max(m[i][j], 0.0);
        }
        r[std::size_t(i)] = {lo, hi};
    }
    return r;
}

} // namespace

std::array<double, 3> rgb_pixel_to(const std::string& space, double r, double g, double b) {
    if (space == "rgb") return {r, g, b};
    if (space == "yiq") return mat_apply(kYiq, r, g, b);
    if (space == "yuv") return mat_apply(kYuv, r, g, b);
    if (space == "hsv") return rgb_to_hsv(r, g, b);
    if (space == "hed") return rgb_to_hed(r, g, b);
    throw Error("unknown color space '" + space + "' (expected rgb|yiq|yuv|hsv|hed)");
}

std::array<std::array<double, 2>, 3> color_space_ranges(const std::string& space) {
    if (space == "rgb" || space == "hsv") return {{{0.0, 1.0}, {0.0, 1.0}, {0.0, 1.0}}};
    if (space == "yiq") return matrix_ranges(kYiq);
    if (space == "yuv") return matrix_ranges(kYuv);
    if (space == "hed") {
        auto mr = matrix_ranges(kHedFromRgb);
        std::array<std::array<double, 2>, 3> r;
        // od coordinates enter columnwise and negatives clamp to zero
        for (int k = 0; k < 3; ++k) {
            double hi = 0.0;
            for (int j = 0; j < 3; ++j) hi += std::max(kHedFromRgb[j][k], 0.0);
            r[std::size_t(k)] = {0.0, hi};
        }
        (void)mr;
        return r;
    }
    throw Error("unknown color space '" + space + "'");
}

LabeledDataset color_space_task(const LabeledDataset& ds, const std::string& space) {
    if (ds.inputs.shape.size() != 4 || ds.inputs.shape[3] != 3)
        throw Error("color_space_task: expected {N,H,W,3} inputs, got " +
                    shape_str(ds.inputs.shape));
    const auto ranges = color_space_ranges(space); // also validates the name
    if (space == "rgb") {
        LabeledDataset out = ds;
        out.provenance = ds.provenance + "|rgb";
        return out;
    }
    LabeledDataset out = ds;
    const std::size_t npix = ds.inputs.data.size() / 3;
    for (std::size_t i = 0; i < npix; ++i) {
        const float* p = ds.inputs.data.data() + i * 3;
        const auto c = rgb_pixel_to(space, p[0], p[1], p[2]);
        for (int k = 0; k < 3; ++k) {
            const auto [lo, hi] = ranges[std::size_t(k)];
            const double v = (c[std::size_t(k)] - lo) / (hi - lo);
            out.inputs.data[i * 3 + std::size_t(k)] = float(std::clamp(v, 0.0, 1.0));
        }
    }
    out.provenance = ds.provenance + "|" + space;
    return out;
}

// --- Task construction ---------------------------------------------------

std::vector<std::vector<int>> make_class_partition(int class_count, int n_tasks,
                                                   std::uint64_t seed) {
    if (n_tasks <= 0 || class_count % n_tasks != 0)
        throw Error("class count " + std::to_string(class_count) + " not divisible by " +
                    std::to_string(n_tasks) + " tasks");
    std::vector<int> classes(static_cast<std::size_t>(class_count));
    std::iota(classes.begin(), classes.end(), 0);
    Rng rng = Rng(seed).stream("class-partition");
    rng.shuffle(classes);
    const int per = class_count / n_tasks;
    std::vector<std::vector<int>> groups;
    for (int t = 0; t < n_tasks; ++t)
        groups.emplace_back(classes.begin() + t * per, classes.begin() + (t + 1) * per);
    return groups;
}

LabeledDataset subset_by_classes(const LabeledDataset& ds, const std::vector<int>& classes) {
    std::map<int, int> remap;
    for (std::size_t i = 0; i < classes.size(); ++i) remap[classes[i]] = int(i);
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < ds.size(); ++i)
        if (remap.count(ds.labels[i])) keep.push_back(i);
    LabeledDataset out;
    out.inputs = ds.gather(keep);
    out.labels.reserve(keep.size());
    for (std::size_t i : keep) out.labels.push_back(remap[ds.labels[i]]);
    out.class_count = int(classes.size());
    out.provenance = ds.provenance + "|classes";
    return out;
}

std::vector<LabeledDataset> class_split_tasks(const LabeledDataset& ds, int n_tasks,
                                              std::uint64_t seed) {
    const auto groups = make_class_partition(ds.class_count, n_tasks, seed);
    std::vector<LabeledDataset> tasks;
    tasks.reserve(groups.size());
    for (const auto& g : groups) tasks.push_back(subset_by_classes(ds, g));
    return tasks;
}

std::pair<LabeledDataset, LabeledDataset> split_train_val(const LabeledDataset& ds,
                                                          double val_fraction,
                                                          std::uint64_t seed) {
    if (!(val_fraction > 0.0 && val_fraction < 1.0))
        throw Error("split_train_val: fraction must be in (0,1)");
    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < ds.size(); ++i) by_class[ds.labels[i]].push_back(i);

    std::vector<std::size_t> train_idx, val_idx;
    Rng base(seed);
    for (auto& [cls, idx] : by_class) {
        if (idx.size() < 2)
            throw Error("split_train_val: class " + std::to_string(cls) + " has only " +
                        std::to_string(idx.size()) + " example(s)");
        Rng rng = base.stream("val-split", std::uint64_t(cls));
        rng.shuffle(idx);
        std::size_t nv = std::size_t(std::llround(val_fraction * double(idx.size())));
        nv = std::clamp<std::size_t>(nv, 1, idx.size() - 1);
        val_idx.insert(val_idx.end(), idx.begin(), idx.begin() + long(nv));
        train_idx.insert(train_idx.end(), idx.begin() + long(nv), idx.end());
    }
    std::sort(train_idx.begin(), train_idx.end());
    std::sort(val_idx.begin(), val_idx.end());

    auto build = [&ds](const std::vector<std::size_t>& idx, const char* tag) {
        LabeledDataset out;
        out.inputs = ds.gather(idx);
        out.labels = ds.gather_labels(idx);
        out.class_count = ds.class_count;
        out.provenance = ds.provenance + tag;
        return out;
    };
    return {build(train_idx, "|train"), build(val_idx, "|val")};
}

// --- Synthetic digits -----------------------------------------------------

namespace {

// Random field on an h x w grid: a handful of Gaussian bumps.
std::vector<float> bump_field(int h, int w, int bumps, double sigma_lo, double sigma_hi,
                              Rng& rng) {
    std::vector<float> f(std::size_t(h) * std::size_t(w), 0.0f);
    for (int b = 0; b < bumps; ++b) {
        const double cy = rng.uniform(0.0, double(h));
        const double cx = rng.uniform(0.0, double(w));
        const double sigma = rng.uniform(sigma_lo, sigma_hi);
        const double amp = rng.uniform(0.4, 1.0);
        for (int r = 0; r < h; ++r)
            for (int c = 0; c < w; ++c) {
                const double d2 = (r - cy) * (r - cy) + (c - cx) * (c - cx);
                f[std::size_t(r) * std::size_t(w) + std::size_t(c)] +=
                    float(amp * std::exp(-d2 / (2.0 * sigma * sigma)));
            }
    }
    float mx = 1e-9f;
    for (float v : f) mx = std::max(mx, v);
    for (auto& v : f) v /= mx;
    return f;
}

} // namespace

std::pair<LabeledDataset, LabeledDataset> make_synthetic_digits(const SyntheticSpec& spec) {
    const int H = spec.height, W = spec.width, K = spec.classes;
    const int pad = int(std::ceil(spec.jitter));
    const int Hp = H + 2 * pad, Wp = W + 2 * pad;
    Rng base(spec.seed);

    const double stroke_lo = 1.2, stroke_hi = double(std::min(H, W)) / 9.0;
    Rng proto_rng = base.stream("prototypes");
    std::vector<std::vector<float>> protos;
    for (int k = 0; k < K; ++k)
        protos.push_back(bump_field(Hp, Wp, 6, stroke_lo, stroke_hi, proto_rng));
    if (spec.pair_similarity > 0.0f) {
        // blend each even/odd pair toward a shared base so the pair is
        // only separable through fine detail
        const float s = spec.pair_similarity;
        for (int k = 0; k + 1 < K; k += 2) {
            auto& a = protos[std::size_t(k)];
            auto& b = protos[std::size_t(k) + 1];
            for (std::size_t i = 0; i < a.size(); ++i) {
                const float base = 0.5f * (a[i] + b[i]);
                a[i] = (1.0f - s) * a[i] + s * base;
                b[i] = (1.0f - s) * b[i] + s * base;
            }
        }
    }
    Rng bg_rng = base.stream("background");
    const std::vector<float> background =
        bump_field(Hp, Wp, 4, stroke_lo, double(std::min(H, W)) / 4.0, bg_rng);

    auto render = [&](int cls, Rng& rng) {
        std::vector<float> img(std::size_t(H) * std::size_t(W));
        const int dy = int(rng.below(std::uint64_t(2 * pad + 1)));
        const int dx = int(rng.below(std::uint64_t(2 * pad + 1)));
        const float gain = float(rng.uniform(0.85, 1.1));
        std::vector<float> noise;
        if (spec.noise > 0.0f) noise = bump_field(H, W, 3, stroke_lo, stroke_hi, rng);
        for (int r = 0; r < H; ++r)
            for (int c = 0; c < W; ++c) {
                const std::size_t src = std::size_t(r + dy) * std::size_t(Wp) +
                                        std::size_t(c + dx);
                float v = gain * protos[std::size_t(cls)][src] +
                          spec.background * background[std::size_t(r + pad) * std::size_t(Wp) +
                                                       std::size_t(c + pad)];
                if (!noise.empty())
                    v += spec.noise * (noise[std::size_t(r) * std::size_t(W) + std::size_t(c)] -
                                       0.5f);
                v += float(rng.uniform(-0.02, 0.02));
                // stroke-like sparsity: intensities below the floor go dark
                v = (v - spec.sparsity) / (1.0f - spec.sparsity);
                img[std::size_t(r) * std::size_t(W) + std::size_t(c)] =
                    std::clamp(v, 0.0f, 1.0f);
            }
        return img;
    };

    std::vector<std::array<float, 3>> tints;
    if (spec.channels == 3) {
        Rng tint_rng = base.stream("tints");
        for (int k = 0; k < K; ++k)
            tints.push_back({float(tint_rng.uniform(0.35, 1.0)),
                             float(tint_rng.uniform(0.35, 1.0)),
                             float(tint_rng.uniform(0.35, 1.0))});
    }

    auto build = [&](int per_class, const char* stream_name, float flip_rate) {
        LabeledDataset ds;
        const std::size_t n = std::size_t(per_class) * std::size_t(K);
        const std::size_t hw = std::size_t(H) * std::size_t(W);
        if (spec.channels == 3)
            ds.inputs = Tensor::zeros({n, std::size_t(H), std::size_t(W), 3});
        else
            ds.inputs = Tensor::zeros({n, hw});
        ds.labels.resize(n);
        ds.class_count = K;
        ds.provenance = std::string("synthetic(seed=") + std::to_string(spec.seed) + ")";
        std::size_t i = 0;
        for (int k = 0; k < K; ++k) {
            Rng rng = base.stream(stream_name, std::uint64_t(k));
            for (int e = 0; e < per_class; ++e, ++i) {
                const auto img = render(k, rng);
                if (spec.channels == 3) {
                    float* dst = ds.inputs.data.data() + i * hw * 3;
                    for (std::size_t p = 0; p < hw; ++p)
                        for (int c = 0; c < 3; ++c)
                            dst[p * 3 + std::size_t(c)] =
                                std::clamp(img[p] * tints[std::size_t(k)][std::size_t(c)] +
                                               float(rng.uniform(-0.02, 0.02)),
                                           0.0f, 1.0f);
                } else {
                    std::copy(img.begin(), img.end(),
                              ds.inputs.data.begin() + long(i * hw));
                }
                ds.labels[i] = k;
            }
        }
        if (flip_rate > 0.0f && K > 1) {
            Rng flip = base.stream("label-noise");
            for (auto& y : ds.labels)
                if (flip.uniform() < double(flip_rate))
                    y = int((std::uint64_t(y) + 1 + flip.below(std::uint64_t(K - 1))) %
                            std::uint64_t(K));
        }
        return ds;
    };

    return {build(spec.train_per_class, "train", spec.label_noise),
            build(spec.test_per_class, "test", 0.0f)};
}

} // namespace fsrlab
