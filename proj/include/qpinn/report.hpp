#pragma once

// Evaluation grids, error metrics against closed forms or reference data,
// and every file the benchmark emits: history CSVs, summary JSON,
// checkpoints, PNG heatmaps and loss curves, and aligned result tables.
//
// All floating-point text is written with round-trip precision so reruns
// with the same seed produce byte-identical files.

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <zlib.h>

#include <nlohmann/json.hpp>

#include "qpinn/net.hpp"
#include "qpinn/pde.hpp"
#include "qpinn/train.hpp"

namespace qpinn::report {

using json = nlohmann::json;
using net::HybridModel;
using pde::PdeProblem;
using trainer::RunRecord;
using trainer::Stat;

inline std::string fmt_double(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

// ---------------------------------------------------------------------------
// Evaluation grids and field errors

struct EvalGrid {
    int nx = 0, ny = 0;
    int d = 0;
    double time_slice = 0.0;            // meaningful when d == 3
    std::vector<double> points;         // row-major nx*ny x d
    std::vector<double> axis_x, axis_y; // plotting axes (columns, rows)
};

/// Uniform nx x ny grid over the spatial extent; three-dimensional problems
/// are sliced at a fixed time (default: the end of the time domain).
inline EvalGrid make_eval_grid(const PdeProblem& p, int n = 100,
                               std::optional<double> time_slice = std::nullopt) {
    EvalGrid g;
    g.nx = g.ny = n;
    g.d = p.d_in;
    const int ax = p.d_in == 3 ? 1 : 0;
    const int ay = p.d_in == 3 ? 2 : 1;
    g.time_slice = time_slice.value_or(p.d_in == 3 ? p.hi[0] : 0.0);
    g.axis_x.resize(n);
    g.axis_y.resize(n);
    for (int i = 0; i < n; ++i) {
        g.axis_x[i] = p.lo[ax] + (p.hi[ax] - p.lo[ax]) * i / (n - 1);
        g.axis_y[i] = p.lo[ay] + (p.hi[ay] - p.lo[ay]) * i / (n - 1);
    }
    g.points.reserve(static_cast<std::size_t>(n) * n * p.d_in);
    for (int iy = 0; iy < n; ++iy) {
        for (int ix = 0; ix < n; ++ix) {
            if (p.d_in == 3) g.points.push_back(g.time_slice);
            g.points.push_back(g.axis_x[ix]);
            g.points.push_back(g.axis_y[iy]);
        }
    }
    return g;
}

inline bool fields_need_derivatives(const PdeProblem& p) {
    return p.id == pde::PdeId::Helmholtz || p.id == pde::PdeId::KleinGordon ||
           p.id == pde::PdeId::ConvectionDiffusion;
}

/// Model predictions of every reported field at the given points.
inline std::vector<std::vector<double>> evaluate_fields(const HybridModel& model,
                                                        const PdeProblem& p,
                                                        std::span<const double> points) {
    const int jet_dim = fields_need_derivatives(p) ? p.d_in : 0;
    const std::size_t n = points.size() / static_cast<std::size_t>(p.d_in);
    std::vector<std::vector<double>> out(p.fields.size(), std::vector<double>(n));
    for (std::size_t i = 0; i < n; ++i) {
        const std::span<const double> x(points.data() + i * p.d_in,
                                        static_cast<std::size_t>(p.d_in));
        const auto u = net::forward_values(model, x, jet_dim);
        const auto f = pde::predicted_fields<double>(p, u);
        for (std::size_t k = 0; k < f.size(); ++k) out[k][i] = f[k];
    }
    return out;
}

inline std::vector<std::vector<double>> closed_form_fields(const PdeProblem& p,
                                                           std::span<const double> points) {
    const std::size_t n = points.size() / static_cast<std::size_t>(p.d_in);
    std::vector<std::vector<double>> out(p.fields.size(), std::vector<double>(n));
    for (std::size_t i = 0; i < n; ++i) {
        const std::span<const double> x(points.data() + i * p.d_in,
                                        static_cast<std::size_t>(p.d_in));
        const auto f = pde::reference_fields(p, x);
        for (std::size_t k = 0; k < f.size(); ++k) out[k][i] = f[k];
    }
    return out;
}

/// External reference data (the Cavity finite-volume solution): CSV with a
/// `t,x,y,u,v,p` header.
struct ReferenceGrid {
    std::vector<double> points;                 // n x 3 (t, x, y)
    std::vector<std::vector<double>> fields;    // [field][n] for u, v, p
    std::vector<double> times, xs, ys;          // strictly increasing axes
};

inline ReferenceGrid load_reference_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open reference file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty reference file: " + path);
    {
        std::string squished;
        for (char c : line)
            if (!std::isspace(static_cast<unsigned char>(c))) squished += c;
        if (squished != "t,x,y,u,v,p")
            throw std::runtime_error("reference header must be t,x,y,u,v,p (got " + line + ")");
    }
    ReferenceGrid g;
    g.fields.assign(3, {});
    std::vector<double> row(6);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        for (int k = 0; k < 6; ++k) {
            if (!std::getline(ss, cell, ','))
                throw std::runtime_error("short reference row: " + line);
            row[k] = std::stod(cell);
        }
        g.points.insert(g.points.end(), {row[0], row[1], row[2]});
        for (int k = 0; k < 3; ++k) g.fields[k].push_back(row[3 + k]);
    }
    if (g.points.empty()) throw std::runtime_error("reference file has no rows: " + path);

    auto collect_axis = [&](int dim) {
        std::vector<double> vals;
        for (std::size_t i = 0; i < g.points.size(); i += 3) vals.push_back(g.points[i + dim]);
        std::sort(vals.begin(), vals.end());
        vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
        return vals;
    };
    g.times = collect_axis(0);
    g.xs = collect_axis(1);
    g.ys = collect_axis(2);
    const std::size_t rows = g.points.size() / 3;
    if (g.times.size() * g.xs.size() * g.ys.size() != rows)
        throw std::runtime_error("reference rows do not form a regular grid");
    return g;
}

/// Per-field relative L2 against the closed form (on a fresh uniform grid) or
/// against the reference rows.
inline std::vector<double> field_errors(const HybridModel& model, const PdeProblem& p,
                                        int grid_n, std::optional<double> time_slice,
                                        const ReferenceGrid* reference) {
    if (p.closed_form) {
        const EvalGrid g = make_eval_grid(p, grid_n, time_slice);
        const auto pred = evaluate_fields(model, p, g.points);
        const auto ref = closed_form_fields(p, g.points);
        std::vector<double> out;
        for (std::size_t k = 0; k < pred.size(); ++k)
            out.push_back(pde::relative_l2(pred[k], ref[k]));
        return out;
    }
    if (reference == nullptr) return {};  // reference-gated metric
    const auto pred = evaluate_fields(model, p, reference->points);
    std::vector<double> out;
    for (std::size_t k = 0; k < pred.size(); ++k)
        out.push_back(pde::relative_l2(pred[k], reference->fields[k]));
    return out;
}

// ---------------------------------------------------------------------------
// PNG output

struct Image {
    int w = 0, h = 0;
    std::vector<uint8_t> rgb;  // 3 bytes per pixel, row-major

    Image(int width, int height, uint8_t fill = 255)
        : w(width), h(height), rgb(static_cast<std::size_t>(width) * height * 3, fill) {}

    void put(int x, int y, uint8_t r, uint8_t g, uint8_t b) {
        if (x < 0 || y < 0 || x >= w || y >= h) return;
        auto* px = &rgb[(static_cast<std::size_t>(y) * w + x) * 3];
        px[0] = r;
        px[1] = g;
        px[2] = b;
    }
};

namespace detail {

inline void png_chunk(std::ofstream& out, const char type[4], const std::vector<uint8_t>& data) {
    auto be32 = [](uint32_t v) {
        return std::array<uint8_t, 4>{static_cast<uint8_t>(v >> 24), static_cast<uint8_t>(v >> 16),
                                      static_cast<uint8_t>(v >> 8), static_cast<uint8_t>(v)};
    };
    const auto len = be32(static_cast<uint32_t>(data.size()));
    out.write(reinterpret_cast<const char*>(len.data()), 4);
    out.write(type, 4);
    if (!data.empty()) out.write(reinterpret_cast<const char*>(data.data()), data.size());
    uint32_t crc = crc32(0, reinterpret_cast<const Bytef*>(type), 4);
    if (!data.empty()) crc = crc32(crc, data.data(), static_cast<uInt>(data.size()));
    const auto c = be32(crc);
    out.write(reinterpret_cast<const char*>(c.data()), 4);
}

}  // namespace detail

inline void write_png(const std::string& path, const Image& img) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    static const uint8_t sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    out.write(reinterpret_cast<const char*>(sig), 8);

    std::vector<uint8_t> ihdr(13, 0);
    auto put32 = [&](int off, uint32_t v) {
        ihdr[off] = static_cast<uint8_t>(v >> 24);
        ihdr[off + 1] = static_cast<uint8_t>(v >> 16);
        ihdr[off + 2] = static_cast<uint8_t>(v >> 8);
        ihdr[off + 3] = static_cast<uint8_t>(v);
    };
    put32(0, static_cast<uint32_t>(img.w));
    put32(4, static_cast<uint32_t>(img.h));
    ihdr[8] = 8;   // bit depth
    ihdr[9] = 2;   // truecolor
    detail::png_chunk(out, "IHDR", ihdr);

    std::vector<uint8_t> raw;
    raw.reserve(static_cast<std::size_t>(img.h) * (1 + 3 * img.w));
    for (int y = 0; y < img.h; ++y) {
        raw.push_back(0);  // filter: none
        const auto* row = &img.rgb[static_cast<std::size_t>(y) * img.w * 3];
        raw.insert(raw.end(), row, row + 3 * img.w);
    }
    uLongf bound = compressBound(static_cast<uLong>(raw.size()));
    std::vector<uint8_t> zdata(bound);
    if (compress2(zdata.data(), &bound, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK)
        throw std::runtime_error("png deflate failed");
    zdata.resize(bound);
    detail::png_chunk(out, "IDAT", zdata);
    detail::png_chunk(out, "IEND", {});
}

/// Viridis, interpolated from anchor points.
inline std::array<uint8_t, 3> viridis(double t) {
    static constexpr double anchors[9][3] = {
        {68, 1, 84},   {72, 40, 120},  {62, 74, 137},  {49, 104, 142}, {38, 130, 142},
        {31, 158, 137}, {53, 183, 121}, {110, 206, 88}, {253, 231, 37}};
    t = std::clamp(t, 0.0, 1.0) * 8.0;
    const int i = std::min(7, static_cast<int>(t));
    const double f = t - i;
    std::array<uint8_t, 3> out{};
    for (int k = 0; k < 3; ++k)
        out[k] = static_cast<uint8_t>(anchors[i][k] + f * (anchors[i + 1][k] - anchors[i][k]));
    return out;
}

/// values laid out row-major ny x nx, row 0 at the bottom of the image.
inline Image heatmap(std::span<const double> values, int nx, int ny,
                     std::optional<double> lo_in = std::nullopt,
                     std::optional<double> hi_in = std::nullopt) {
    double lo = lo_in.value_or(*std::min_element(values.begin(), values.end()));
    double hi = hi_in.value_or(*std::max_element(values.begin(), values.end()));
    if (hi <= lo) hi = lo + 1.0;
    const int cell = std::max(1, 400 / std::max(nx, ny));
    Image img(nx * cell, ny * cell);
    for (int iy = 0; iy < ny; ++iy) {
        for (int ix = 0; ix < nx; ++ix) {
            const double v = values[static_cast<std::size_t>(iy) * nx + ix];
            const auto c = viridis((v - lo) / (hi - lo));
            for (int dy = 0; dy < cell; ++dy)
                for (int dx = 0; dx < cell; ++dx)
                    img.put(ix * cell + dx, (ny - 1 - iy) * cell + dy, c[0], c[1], c[2]);
        }
    }
    return img;
}

namespace detail {

// 3x5 glyphs for axis labels, one row per entry, 3 low bits used.
inline const uint8_t* glyph(char c) {
    static const std::map<char, std::array<uint8_t, 5>> font = {
        {'0', {7, 5, 5, 5, 7}}, {'1', {2, 6, 2, 2, 7}}, {'2', {7, 1, 7, 4, 7}},
        {'3', {7, 1, 7, 1, 7}}, {'4', {5, 5, 7, 1, 1}}, {'5', {7, 4, 7, 1, 7}},
        {'6', {7, 4, 7, 5, 7}}, {'7', {7, 1, 1, 2, 2}}, {'8', {7, 5, 7, 5, 7}},
        {'9', {7, 5, 7, 1, 7}}, {'-', {0, 0, 7, 0, 0}}, {'.', {0, 0, 0, 0, 2}},
        {'e', {7, 4, 7, 4, 7}}, {'+', {0, 2, 7, 2, 0}}, {' ', {0, 0, 0, 0, 0}}};
    const auto it = font.find(c);
    return it == font.end() ? font.at(' ').data() : it->second.data();
}

inline void draw_text(Image& img, int x, int y, const std::string& text, uint8_t r, uint8_t g,
                      uint8_t b) {
    for (char c : text) {
        const uint8_t* rows = glyph(c);
        for (int gy = 0; gy < 5; ++gy)
            for (int gx = 0; gx < 3; ++gx)
                if (rows[gy] & (4 >> gx)) img.put(x + gx, y + gy, r, g, b);
        x += 4;
    }
}

inline void draw_line(Image& img, int x0, int y0, int x1, int y1, uint8_t r, uint8_t g,
                      uint8_t b) {
    const int dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
    const int sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
    int err = dx + dy;
    while (true) {
        img.put(x0, y0, r, g, b);
        if (x0 == x1 && y0 == y1) break;
        const int e2 = 2 * err;
        if (e2 >= dy) {
            err += dy;
            x0 += sx;
        }
        if (e2 <= dx) {
            err += dx;
            y0 += sy;
        }
    }
}

}  // namespace detail

/// Log-scale loss curves, one line per labeled series.
inline Image loss_curve_plot(const std::vector<std::pair<std::string, std::vector<double>>>& series) {
    const int w = 640, h = 420, ml = 48, mr = 12, mt = 14, mb = 28;
    Image img(w, h);
    std::size_t epochs = 1;
    double lo = 1e300, hi = -1e300;
    for (const auto& [name, ys] : series) {
        epochs = std::max(epochs, ys.size());
        for (double y : ys)
            if (y > 0) {
                lo = std::min(lo, y);
                hi = std::max(hi, y);
            }
    }
    if (hi < lo) {
        lo = 0.1;
        hi = 10;
    }
    const double llo = std::floor(std::log10(lo)), lhi = std::ceil(std::log10(hi * 1.0000001));
    auto xmap = [&](std::size_t e) {
        return ml + static_cast<int>((w - ml - mr - 1) * static_cast<double>(e) /
                                     std::max<std::size_t>(1, epochs - 1));
    };
    auto ymap = [&](double v) {
        const double t = (std::log10(std::max(v, 1e-300)) - llo) / std::max(1.0, lhi - llo);
        return h - mb - static_cast<int>((h - mt - mb - 1) * std::clamp(t, 0.0, 1.0));
    };

    for (int d = 0; d <= static_cast<int>(lhi - llo); ++d) {
        const double v = std::pow(10.0, llo + d);
        const int y = ymap(v);
        detail::draw_line(img, ml, y, w - mr, y, 225, 225, 225);
        char label[16];
        std::snprintf(label, sizeof label, "1e%+d", static_cast<int>(llo) + d);
        detail::draw_text(img, 6, y - 2, label, 80, 80, 80);
    }
    for (int k = 0; k <= 4; ++k) {
        const std::size_t e = epochs * k / 4;
        const int x = xmap(std::min(e, epochs - 1));
        detail::draw_line(img, x, mt, x, h - mb, 235, 235, 235);
        detail::draw_text(img, x - 8, h - mb + 6, std::to_string(e), 80, 80, 80);
    }
    detail::draw_line(img, ml, mt, ml, h - mb, 40, 40, 40);
    detail::draw_line(img, ml, h - mb, w - mr, h - mb, 40, 40, 40);

    static constexpr uint8_t palette[6][3] = {{31, 119, 180}, {255, 127, 14}, {44, 160, 44},
                                              {214, 39, 40},  {148, 103, 189}, {140, 86, 75}};
    for (std::size_t s = 0; s < series.size(); ++s) {
        const auto& ys = series[s].second;
        const auto* c = palette[s % 6];
        for (std::size_t e = 1; e < ys.size(); ++e) {
            if (ys[e - 1] <= 0 || ys[e] <= 0) continue;
            detail::draw_line(img, xmap(e - 1), ymap(ys[e - 1]), xmap(e), ymap(ys[e]), c[0], c[1],
                              c[2]);
        }
        detail::draw_text(img, ml + 8 + static_cast<int>(s) * 90, mt + 2,
                          std::to_string(s) + " " + series[s].first.substr(0, 12), c[0], c[1],
                          c[2]);
    }
    return img;
}

// ---------------------------------------------------------------------------
// CSV / JSON artifacts

inline void write_history_csv(const std::string& path, const RunRecord& rec) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "epoch,total";
    for (const auto& n : rec.term_names) out << ',' << n;
    out << ",lr\n";
    for (std::size_t e = 0; e < rec.total_history.size(); ++e) {
        out << e << ',' << fmt_double(rec.total_history[e]);
        for (const auto& th : rec.term_history) out << ',' << fmt_double(th[e]);
        out << ',' << fmt_double(rec.lr_history[e]) << '\n';
    }
}

inline json model_manifest(const net::ModelSpec& spec) {
    json m;
    m["kind"] = net::to_string(spec.kind);
    m["d_in"] = spec.d_in;
    m["d_out"] = spec.d_out;
    if (spec.kind == net::ModelKind::DvHybrid) {
        m["embedding"] = dv::to_string(spec.embedding);
        m["topology"] = dv::to_string(spec.topology);
        m["qubits"] = spec.n_qubits;
        m["layers"] = spec.n_layers;
    }
    if (spec.kind == net::ModelKind::CvHybrid) {
        m["qumodes"] = spec.cv.n_qumodes;
        m["cutoff"] = spec.cv.cutoff;
        m["layers"] = spec.cv.n_layers;
        m["measurement"] = cv::to_string(spec.cv.measurement);
        m["nonlinearity"] = cv::to_string(spec.cv.nonlinearity);
        m["parameterization"] = cv::to_string(spec.cv.parameterization);
    }
    return m;
}

inline net::ModelSpec model_from_manifest(const json& m) {
    net::ModelSpec spec;
    spec.kind = net::model_kind_from_string(m.at("kind").get<std::string>());
    spec.d_in = m.at("d_in").get<int>();
    spec.d_out = m.at("d_out").get<int>();
    if (spec.kind == net::ModelKind::DvHybrid) {
        spec.embedding = dv::embedding_from_string(m.at("embedding").get<std::string>());
        spec.topology = dv::topology_from_string(m.at("topology").get<std::string>());
        spec.n_qubits = m.at("qubits").get<int>();
        spec.n_layers = m.at("layers").get<int>();
    }
    if (spec.kind == net::ModelKind::CvHybrid) {
        spec.cv.n_qumodes = m.at("qumodes").get<int>();
        spec.cv.cutoff = m.at("cutoff").get<int>();
        spec.cv.n_layers = m.at("layers").get<int>();
        spec.cv.measurement = cv::measurement_from_string(m.at("measurement").get<std::string>());
        spec.cv.nonlinearity =
            cv::nonlinearity_from_string(m.at("nonlinearity").get<std::string>());
        spec.cv.parameterization =
            cv::parameterization_from_string(m.at("parameterization").get<std::string>());
    }
    return spec;
}

/// Checkpoint: a JSON shape manifest plus the flat 64-bit parameter vector
/// (JSON numbers round-trip doubles exactly).
inline void save_checkpoint(const std::string& path, const HybridModel& model,
                            const std::string& problem_name) {
    json ck;
    ck["schema"] = "qpinn-checkpoint-v1";
    ck["problem"] = problem_name;
    ck["model"] = model_manifest(model.spec());
    ck["params"] = model.params();
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << ck.dump(1) << '\n';
}

struct Checkpoint {
    std::string problem;
    HybridModel model;
};

inline Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
    json ck = json::parse(in);
    if (ck.value("schema", "") != "qpinn-checkpoint-v1")
        throw std::runtime_error("unknown checkpoint schema in " + path);
    HybridModel model(model_from_manifest(ck.at("model")));
    const auto params = ck.at("params").get<std::vector<double>>();
    if (params.size() != model.total_slots())
        throw std::runtime_error("checkpoint parameter count mismatch");
    model.params() = params;
    return {ck.at("problem").get<std::string>(), std::move(model)};
}

// ---------------------------------------------------------------------------
// Field rendering

/// Writes <field>_pred.png / _ref.png / _err.png plus fields.csv under `dir`.
/// Reference columns appear when a closed form or reference grid is at hand.
inline void render_fields(const HybridModel& model, const PdeProblem& p, const std::string& dir,
                          int grid_n = 100, std::optional<double> time_slice = std::nullopt,
                          const ReferenceGrid* reference = nullptr) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);

    std::vector<double> points;
    std::vector<std::vector<double>> ref;
    int nx = grid_n, ny = grid_n;
    bool have_ref = false;

    if (p.closed_form) {
        const EvalGrid g = make_eval_grid(p, grid_n, time_slice);
        points = g.points;
        ref = closed_form_fields(p, points);
        have_ref = true;
    } else if (reference != nullptr) {
        // Render on the reference slice nearest the requested time.
        const double want = time_slice.value_or(p.hi[0]);
        double best = reference->times.front();
        for (double t : reference->times)
            if (std::abs(t - want) < std::abs(best - want)) best = t;
        nx = static_cast<int>(reference->xs.size());
        ny = static_cast<int>(reference->ys.size());
        ref.assign(p.fields.size(), {});
        for (std::size_t i = 0; i < reference->points.size() / 3; ++i) {
            if (reference->points[3 * i] != best) continue;
            points.insert(points.end(), {best, reference->points[3 * i + 1],
                                         reference->points[3 * i + 2]});
            for (std::size_t k = 0; k < p.fields.size(); ++k)
                ref[k].push_back(reference->fields[k][i]);
        }
        have_ref = true;
    } else {
        const EvalGrid g = make_eval_grid(p, grid_n, time_slice);
        points = g.points;
    }

    const auto pred = evaluate_fields(model, p, points);
    const std::size_t n = points.size() / static_cast<std::size_t>(p.d_in);

    std::ofstream csv(fs::path(dir) / "fields.csv");
    for (int k = 0; k < p.d_in; ++k) csv << (k ? "," : "") << "x" << k;
    for (const auto& f : p.fields) {
        csv << ",pred_" << f;
        if (have_ref) csv << ",ref_" << f << ",err_" << f;
    }
    csv << '\n';
    for (std::size_t i = 0; i < n; ++i) {
        for (int k = 0; k < p.d_in; ++k)
            csv << (k ? "," : "") << fmt_double(points[i * p.d_in + k]);
        for (std::size_t f = 0; f < p.fields.size(); ++f) {
            csv << ',' << fmt_double(pred[f][i]);
            if (have_ref)
                csv << ',' << fmt_double(ref[f][i]) << ','
                    << fmt_double(std::abs(pred[f][i] - ref[f][i]));
        }
        csv << '\n';
    }

    for (std::size_t f = 0; f < p.fields.size(); ++f) {
        const auto& name = p.fields[f];
        if (have_ref) {
            const double lo = *std::min_element(ref[f].begin(), ref[f].end());
            const double hi = *std::max_element(ref[f].begin(), ref[f].end());
            write_png((fs::path(dir) / (name + "_pred.png")).string(),
                      heatmap(pred[f], nx, ny, lo, hi));
            write_png((fs::path(dir) / (name + "_ref.png")).string(),
                      heatmap(ref[f], nx, ny, lo, hi));
            std::vector<double> err(n);
            for (std::size_t i = 0; i < n; ++i) err[i] = std::abs(pred[f][i] - ref[f][i]);
            write_png((fs::path(dir) / (name + "_err.png")).string(),
                      heatmap(err, nx, ny, 0.0, std::nullopt));
        } else {
            write_png((fs::path(dir) / (name + "_pred.png")).string(),
                      heatmap(pred[f], nx, ny));
        }
    }
}

// ---------------------------------------------------------------------------
// Result tables

struct ResultRow {
    std::string problem;
    std::string model;
    std::size_t param_count = 0;
    std::vector<std::string> fields;
    std::vector<Stat> l2;  // one per field; empty when no reference exists
    Stat final_loss;
    Stat time_per_iter;
    Stat peak_memory_mb;
    bool failed = false;
    std::string note;
};

inline std::string stat_cell(const Stat& s, int prec = 2) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f +/- %.*f", prec, s.mean, prec, s.stddev);
    return buf;
}

inline void write_results_csv(const std::string& path, const std::vector<ResultRow>& rows) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "problem,model,params,field,l2_mean,l2_std,final_loss_mean,final_loss_std,"
           "time_per_iter_s,peak_memory_mb,status\n";
    for (const auto& r : rows) {
        const std::size_t nf = std::max<std::size_t>(1, r.fields.size());
        for (std::size_t f = 0; f < nf; ++f) {
            out << r.problem << ',' << r.model << ',' << r.param_count << ','
                << (f < r.fields.size() ? r.fields[f] : "") << ',';
            if (f < r.l2.size()) {
                out << fmt_double(r.l2[f].mean) << ',' << fmt_double(r.l2[f].stddev);
            } else {
                out << ',';
            }
            out << ',' << fmt_double(r.final_loss.mean) << ',' << fmt_double(r.final_loss.stddev)
                << ',' << fmt_double(r.time_per_iter.mean) << ','
                << fmt_double(r.peak_memory_mb.mean) << ','
                << (r.failed ? "failed: " + r.note : "ok") << '\n';
        }
    }
}

inline std::string format_results_text(const std::vector<ResultRow>& rows) {
    std::vector<std::array<std::string, 7>> cells;
    cells.push_back({"problem", "model", "N_p", "field", "L2 (%)", "final loss", "T (s/iter)"});
    for (const auto& r : rows) {
        if (r.failed) {
            cells.push_back({r.problem, r.model, std::to_string(r.param_count), "-",
                             "failed: " + r.note, "", ""});
            continue;
        }
        const std::size_t nf = std::max<std::size_t>(1, r.fields.size());
        for (std::size_t f = 0; f < nf; ++f) {
            cells.push_back({f == 0 ? r.problem : "", f == 0 ? r.model : "",
                             f == 0 ? std::to_string(r.param_count) : "",
                             f < r.fields.size() ? r.fields[f] : "",
                             f < r.l2.size() ? stat_cell(r.l2[f]) : "n/a",
                             f == 0 ? stat_cell(r.final_loss, 4) : "",
                             f == 0 ? stat_cell(r.time_per_iter, 4) : ""});
        }
    }
    std::array<std::size_t, 7> width{};
    for (const auto& row : cells)
        for (std::size_t c = 0; c < 7; ++c) width[c] = std::max(width[c], row[c].size());
    std::string out;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        for (std::size_t c = 0; c < 7; ++c) {
            out += cells[i][c];
            out.append(width[c] - cells[i][c].size() + 2, ' ');
        }
        out += '\n';
        if (i == 0) {
            for (std::size_t c = 0; c < 7; ++c) out.append(width[c] + 2, c == 6 ? '-' : '-');
            out += '\n';
        }
    }
    return out;
}

}  // namespace qpinn::report
