#include "vdpu/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>
#include <thread>

#include "vdpu/error.hpp"
#include "vdpu/quantizer.hpp"

namespace vdpu {

namespace {

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string trim(std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
    std::vector<std::vector<std::string>> out;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> cells;
        std::istringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) cells.push_back(trim(cell));
        if (!line.empty() && line.back() == ',') cells.emplace_back();
        out.push_back(std::move(cells));
    }
    return out;
}

double to_number(const std::string& s, const std::string& what) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw FormatError("bad number '" + s + "' for " + what);
    }
}

// Renders rows as space-padded columns; the first column is left aligned.
std::string aligned(const std::vector<std::vector<std::string>>& table) {
    std::vector<std::size_t> width;
    for (const auto& r : table)
        for (std::size_t i = 0; i < r.size(); ++i) {
            if (width.size() <= i) width.push_back(0);
            width[i] = std::max(width[i], r[i].size());
        }
    std::ostringstream os;
    for (const auto& r : table) {
        std::string line;
        for (std::size_t i = 0; i < r.size(); ++i) {
            const auto pad = std::string(width[i] - r[i].size(), ' ');
            line += i == 0 ? r[i] + pad : "  " + pad + r[i];
        }
        os << trim(line) << '\n';
    }
    return os.str();
}

double ratio_cell(double v) { return std::round(v * 100.0) / 100.0; }

}  // namespace

// ---- metrics ----

MetricRow compute_metrics(double fps, double power_w, std::int64_t images, std::int64_t ops_per_frame) {
    std::vector<std::string> diags;
    if (!(fps > 0.0)) diags.push_back("fps must be positive");
    if (!(power_w > 0.0)) diags.push_back("power must be positive");
    if (images < 1) diags.push_back("image count must be positive");
    if (ops_per_frame < 0) diags.push_back("ops per frame must be non-negative");
    if (!diags.empty()) throw ValidationError(std::move(diags));
    MetricRow m;
    m.fps = fps;
    m.power_w = power_w;
    m.images = images;
    m.ops_per_frame = ops_per_frame;
    m.latency_s = static_cast<double>(images) / fps;
    m.efficiency = fps / power_w;
    m.achieved_gops = static_cast<double>(ops_per_frame) * fps / 1e9;
    return m;
}

const ComparisonRow& ComparisonReport::row(const std::string& platform) const {
    for (const auto& r : rows)
        if (r.metrics.platform == platform) return r;
    throw Error("no row for platform '" + platform + "'");
}

ComparisonReport compare_report(const std::vector<MetricRow>& rows, const std::string& baseline) {
    const auto base = std::find_if(rows.begin(), rows.end(), [&](const MetricRow& r) { return r.platform == baseline; });
    if (base == rows.end()) throw ValidationError("baseline row '" + baseline + "' not present");
    ComparisonReport rep;
    rep.baseline = baseline;
    for (const auto& m : rows) {
        ComparisonRow r;
        r.metrics = m;
        r.throughput_ratio = m.fps / base->fps;
        r.efficiency_ratio = m.efficiency / base->efficiency;
        if (m.reported_efficiency && std::abs(*m.reported_efficiency - m.efficiency) >= 0.005) {
            r.reported_efficiency_ratio = *m.reported_efficiency / base->efficiency;
            r.footnote = static_cast<int>(rep.footnotes.size()) + 1;
            rep.footnotes.push_back(m.platform + ": the source prints " + fmt("%.2f", *m.reported_efficiency) +
                                    " FPS/W (" + fmt("%.2f", *r.reported_efficiency_ratio) + "x vs " + baseline +
                                    "), but " + fmt("%.2f", m.fps) + " / " + fmt("%g", m.power_w) + " = " +
                                    fmt("%.2f", m.efficiency) + " FPS/W; the computed value is shown");
        }
        rep.rows.push_back(std::move(r));
    }
    return rep;
}

std::string ComparisonReport::to_text() const {
    std::vector<std::vector<std::string>> t;
    t.push_back({"platform", "fps", "power_w", "latency_s", "fps_per_w", "accuracy", "throughput_x", "efficiency_x"});
    for (const auto& r : rows) {
        const auto& m = r.metrics;
        const std::string mark = r.footnote ? "[" + std::to_string(*r.footnote) + "]" : "";
        t.push_back({m.platform, fmt("%.2f", m.fps), fmt("%.2f", m.power_w), fmt("%.2f", m.latency_s),
                     fmt("%.2f", m.efficiency) + mark, m.accuracy ? fmt("%.2f", *m.accuracy) : "-",
                     fmt("%.2fx", ratio_cell(r.throughput_ratio)), fmt("%.2fx", ratio_cell(r.efficiency_ratio)) + mark});
    }
    std::string out = "comparison against " + baseline + "\n" + aligned(t);
    for (std::size_t i = 0; i < footnotes.size(); ++i) out += "[" + std::to_string(i + 1) + "] " + footnotes[i] + "\n";
    return out;
}

std::string ComparisonReport::to_csv() const {
    std::ostringstream os;
    os << "platform,fps,power_w,images,latency_s,fps_per_w,accuracy,throughput_ratio,efficiency_ratio,"
          "reported_fps_per_w,reported_efficiency_ratio\n";
    for (const auto& r : rows) {
        const auto& m = r.metrics;
        os << m.platform << ',' << fmt("%.4f", m.fps) << ',' << fmt("%.4f", m.power_w) << ',' << m.images << ','
           << fmt("%.4f", m.latency_s) << ',' << fmt("%.4f", m.efficiency) << ','
           << (m.accuracy ? fmt("%.4f", *m.accuracy) : "") << ',' << fmt("%.4f", r.throughput_ratio) << ','
           << fmt("%.4f", r.efficiency_ratio) << ','
           << (r.reported_efficiency_ratio ? fmt("%.4f", *m.reported_efficiency) : "") << ','
           << (r.reported_efficiency_ratio ? fmt("%.4f", *r.reported_efficiency_ratio) : "") << '\n';
    }
    return os.str();
}

std::vector<MetricRow> parse_metric_rows(const std::string& csv) {
    const auto table = parse_csv(csv);
    if (table.empty()) throw FormatError("metric rows: empty CSV");
    std::map<std::string, std::size_t> col;
    for (std::size_t i = 0; i < table[0].size(); ++i) col[table[0][i]] = i;
    for (const char* need : {"platform", "fps", "power_w"})
        if (!col.count(need)) throw FormatError(std::string("metric rows: missing column '") + need + "'");
    std::vector<MetricRow> rows;
    for (std::size_t r = 1; r < table.size(); ++r) {
        const auto& cells = table[r];
        auto cell = [&](const std::string& name) -> std::string {
            auto it = col.find(name);
            return it == col.end() || it->second >= cells.size() ? std::string{} : cells[it->second];
        };
        const std::string images = cell("images");
        const std::string ops = cell("ops_per_frame");
        MetricRow m = compute_metrics(to_number(cell("fps"), "fps"), to_number(cell("power_w"), "power_w"),
                                      images.empty() ? 10000 : static_cast<std::int64_t>(to_number(images, "images")),
                                      ops.empty() ? 0 : static_cast<std::int64_t>(to_number(ops, "ops_per_frame")));
        m.platform = cell("platform");
        if (m.platform.empty()) throw FormatError("metric rows: row " + std::to_string(r) + " has no platform");
        if (const auto a = cell("accuracy"); !a.empty()) m.accuracy = to_number(a, "accuracy");
        if (const auto e = cell("reported_efficiency"); !e.empty()) m.reported_efficiency = to_number(e, "reported_efficiency");
        rows.push_back(std::move(m));
    }
    return rows;
}

std::vector<MetricRow> load_metric_rows(const std::filesystem::path& path) { return parse_metric_rows(read_text(path)); }

// ---- throughput model ----

std::int64_t makespan_cycles(const std::vector<LayerTotals>& layers, const TargetConfig& target, int threads,
                             std::int64_t images, const StreamModel& model) {
    if (threads < 1) throw ValidationError("thread count must be >= 1");
    if (images < 1) throw ValidationError("image count must be >= 1");
    const std::int64_t t = threads;
    const std::int64_t full = images / t;  // steps where every stream is live
    const std::int64_t rem = images % t;   // streams carrying one extra frame
    std::int64_t total = full * frame_trace(layers, target, threads, model).total_cycles;
    if (rem > 0) total += frame_trace(layers, target, static_cast<int>(rem), model).total_cycles;
    return total;
}

double predict_fps(const std::vector<LayerTotals>& layers, const TargetConfig& target, int threads,
                   std::int64_t images, const StreamModel& model) {
    const auto cycles = makespan_cycles(layers, target, threads, images, model);
    return static_cast<double>(images) / (static_cast<double>(cycles) / target.clock_hz());
}

json FitResult::to_json() const {
    json obs = json::array();
    for (std::size_t i = 0; i < observed.size(); ++i)
        obs.push_back({{"threads", observed[i].threads},
                       {"observed_fps", observed[i].fps},
                       {"predicted_fps", predicted_fps[i]},
                       {"residual", residuals[i]}});
    return {{"core_time_s", core_time_s}, {"kappa", kappa}, {"observations", obs}, {"rms_residual", rms_residual}};
}

namespace {

// Minimizes f on [lo, hi]: dense scan, then golden-section search around the best sample.
template <class F>
double minimize_1d(F f, double lo, double hi, int samples, bool log_scale) {
    auto at = [&](int i) {
        const double u = static_cast<double>(i) / samples;
        return log_scale ? lo * std::pow(hi / lo, u) : lo + (hi - lo) * u;
    };
    int best = 0;
    double best_v = f(at(0));
    for (int i = 1; i <= samples; ++i) {
        const double v = f(at(i));
        if (v < best_v) {
            best_v = v;
            best = i;
        }
    }
    double a = at(std::max(0, best - 1));
    double b = at(std::min(samples, best + 1));
    const double g = (std::sqrt(5.0) - 1.0) / 2.0;
    double x1 = b - g * (b - a), x2 = a + g * (b - a);
    double f1 = f(x1), f2 = f(x2);
    for (int it = 0; it < 100 && (b - a) > 1e-12 * std::max(1.0, std::abs(b)); ++it) {
        if (f1 <= f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = f(x2);
        }
    }
    const double mid = f1 <= f2 ? x1 : x2;
    const double best_x = at(best);
    return f(mid) <= best_v ? mid : best_x;
}

}  // namespace

FitResult fit_scenario(const std::vector<Observation>& observations, const TargetConfig& target,
                       const std::vector<LayerTotals>& layers, std::int64_t images) {
    std::vector<std::string> diags;
    if (observations.empty()) diags.push_back("no observations");
    bool has_low = false, has_high = false;
    for (const auto& o : observations) {
        if (o.threads < 1) diags.push_back("observation with thread count " + std::to_string(o.threads));
        if (!(o.fps > 0.0)) diags.push_back("observation with non-positive fps " + fmt("%g", o.fps));
        (o.threads <= target.cores ? has_low : has_high) = true;
    }
    if (!observations.empty() && !has_low)
        diags.push_back("need at least one observation with threads <= cores to identify core time");
    if (layers.empty()) diags.push_back("no layer totals");
    if (!diags.empty()) throw ValidationError(std::move(diags));

    auto sse = [&](double t, double kappa, bool low_only) {
        double s = 0.0;
        for (const auto& o : observations) {
            if (low_only && o.threads > target.cores) continue;
            const double p = predict_fps(layers, target, o.threads, images, {kappa, t});
            const double r = (p - o.fps) / o.fps;
            s += r * r;
        }
        return s;
    };

    double max_fps = 0.0;
    for (const auto& o : observations) max_fps = std::max(max_fps, o.fps);
    const double t_lo = 1e-3 / max_fps, t_hi = 100.0 / max_fps * target.cores;
    constexpr double kappa_hi = 50.0;

    double t = minimize_1d([&](double x) { return sse(x, 0.0, true); }, t_lo, t_hi, 4000, true);
    double kappa = 0.0;
    auto fit_kappa = [&] {
        if (!has_high) return 0.0;
        // the grid starts at exactly zero
        return minimize_1d([&](double k) { return sse(t, k, false); }, 0.0, kappa_hi, 5000, false);
    };
    kappa = fit_kappa();
    for (int round = 0; round < 3 && has_high; ++round) {
        t = minimize_1d([&](double x) { return sse(x, kappa, false); }, t / 1.5, t * 1.5, 400, true);
        kappa = fit_kappa();
    }

    FitResult fit;
    fit.core_time_s = t;
    fit.kappa = kappa;
    fit.observed = observations;
    double s = 0.0;
    for (const auto& o : observations) {
        const double p = predict_fps(layers, target, o.threads, images, {kappa, t});
        fit.predicted_fps.push_back(p);
        fit.residuals.push_back((p - o.fps) / o.fps);
        s += fit.residuals.back() * fit.residuals.back();
    }
    fit.rms_residual = std::sqrt(s / static_cast<double>(observations.size()));
    return fit;
}

std::vector<Observation> parse_observations(const std::string& csv) {
    const auto table = parse_csv(csv);
    if (table.empty()) throw FormatError("observations: empty CSV");
    std::vector<Observation> out;
    for (std::size_t r = 1; r < table.size(); ++r) {
        if (table[r].size() < 2) throw FormatError("observations: row " + std::to_string(r) + " needs threads,fps");
        out.push_back({static_cast<int>(to_number(table[r][0], "threads")), to_number(table[r][1], "fps")});
    }
    return out;
}

std::vector<Observation> load_observations(const std::filesystem::path& path) {
    return parse_observations(read_text(path));
}

// ---- scenario ----

Scenario load_scenario(const std::filesystem::path& path) {
    json j;
    try {
        j = json::parse(read_text(path));
    } catch (const json::exception& e) {
        throw FormatError("scenario " + path.string() + ": " + e.what());
    }
    const auto dir = path.parent_path();
    auto resolve = [&](const std::string& p) {
        const std::filesystem::path q(p);
        return q.is_absolute() ? q : dir / q;
    };
    Scenario s;
    std::vector<std::string> diags;
    try {
        s.name = j.value("name", path.stem().string());
        s.target = resolve(j.at("target").get<std::string>());
        s.model = resolve(j.at("model").get<std::string>());
        s.threads = j.value("threads", s.threads);
        s.images = j.value("images", s.images);
        s.kappa = j.value("kappa", 0.0);
        if (j.contains("core_time_s") && !j["core_time_s"].is_null()) s.core_time_s = j["core_time_s"].get<double>();
        s.baseline = j.value("baseline", s.baseline);
        for (const auto& b : j.value("baselines", json::array())) {
            MetricRow m = compute_metrics(b.at("fps").get<double>(), b.at("power_w").get<double>(),
                                          b.value("images", s.images), 0);
            m.platform = b.at("platform").get<std::string>();
            if (b.contains("accuracy")) m.accuracy = b["accuracy"].get<double>();
            if (b.contains("reported_efficiency")) m.reported_efficiency = b["reported_efficiency"].get<double>();
            s.baselines.push_back(std::move(m));
        }
        for (const auto& [k, v] : j.items())
            if (k != "name" && k != "target" && k != "model" && k != "threads" && k != "images" && k != "kappa" &&
                k != "core_time_s" && k != "baseline" && k != "baselines")
                s.extra[k] = v;
    } catch (const json::exception& e) {
        throw FormatError("scenario " + path.string() + ": " + e.what());
    }
    if (s.threads.empty()) diags.push_back("scenario has no thread counts");
    for (int t : s.threads)
        if (t < 1) diags.push_back("thread count " + std::to_string(t) + " < 1");
    if (s.images < 1) diags.push_back("scenario image count < 1");
    if (s.kappa < 0) diags.push_back("kappa must be >= 0");
    if (s.core_time_s && !(*s.core_time_s > 0)) diags.push_back("core_time_s must be positive");
    if (!diags.empty()) throw ValidationError(std::move(diags));
    return s;
}

json scenario_to_json(const Scenario& s) {
    json j = s.extra;
    j["name"] = s.name;
    j["target"] = s.target.generic_string();
    j["model"] = s.model.generic_string();
    j["threads"] = s.threads;
    j["images"] = s.images;
    j["kappa"] = s.kappa;
    j["core_time_s"] = s.core_time_s ? json(*s.core_time_s) : json(nullptr);
    j["baseline"] = s.baseline;
    json rows = json::array();
    for (const auto& m : s.baselines) {
        json r{{"platform", m.platform}, {"fps", m.fps}, {"power_w", m.power_w}, {"images", m.images}};
        if (m.accuracy) r["accuracy"] = *m.accuracy;
        if (m.reported_efficiency) r["reported_efficiency"] = *m.reported_efficiency;
        rows.push_back(r);
    }
    j["baselines"] = rows;
    return j;
}

// ---- benchmark ----

RunReport run_benchmark(const LoadedModel& handle, const BenchmarkOptions& options, const Cifar10Batch* data) {
    const CompiledModel& cm = handle.compiled();
    const TargetConfig& target = handle.target();
    std::vector<std::string> diags;
    if (options.threads.empty()) diags.push_back("no thread counts");
    for (int t : options.threads)
        if (t < 1) diags.push_back("thread count " + std::to_string(t) + " < 1");
    std::int64_t images = options.images;
    if (options.execute) {
        if (!data) diags.push_back("execution requested without image data");
        else images = std::min<std::int64_t>(images, static_cast<std::int64_t>(data->count()));
    }
    if (images < 1) diags.push_back("empty image set");
    if (!diags.empty()) throw ValidationError(std::move(diags));

    RunReport rep;
    rep.model = cm.model.name;
    rep.target = target.name;
    rep.power_w = target.power_w;
    rep.bandwidth_mbps = target.bandwidth_mbps;
    rep.ops_per_frame = cm.total_ops().total();
    rep.bytes_per_frame = cm.total_bytes();

    for (int T : options.threads) {
        // cost of one lockstep step with s live streams
        std::vector<std::int64_t> step(static_cast<std::size_t>(T) + 1, 0);
        for (int s = 1; s <= T; ++s) step[static_cast<std::size_t>(s)] = frame_trace(cm, target, s, options.stream).total_cycles;

        std::vector<std::vector<std::int64_t>> subsets(static_cast<std::size_t>(T));
        for (std::int64_t i = 0; i < images; ++i) subsets[static_cast<std::size_t>(i % T)].push_back(i);
        auto live_at = [&](std::size_t j) {
            int s = 0;
            for (const auto& sub : subsets) s += sub.size() > j ? 1 : 0;
            return s;
        };

        std::vector<std::int64_t> stream_cycles(static_cast<std::size_t>(T), 0);
        std::vector<int> visits(static_cast<std::size_t>(images), 0);
        std::vector<int> predictions(static_cast<std::size_t>(images), -1);
        auto drive = [&](std::size_t stream) {
            const auto& sub = subsets[stream];
            for (std::size_t j = 0; j < sub.size(); ++j) {
                const auto img = static_cast<std::size_t>(sub[j]);
                stream_cycles[stream] += step[static_cast<std::size_t>(live_at(j))];
                visits[img] += 1;
                if (options.execute)
                    predictions[img] =
                        simulate_frame(handle, data->images[img], static_cast<int>(stream) % target.cores).class_index;
            }
        };
        const unsigned workers =
            options.host_threads == 0 ? static_cast<unsigned>(T) : std::min<unsigned>(options.host_threads, T);
        if (workers <= 1) {
            for (std::size_t s = 0; s < subsets.size(); ++s) drive(s);
        } else {
            std::vector<std::thread> pool;
            std::vector<std::exception_ptr> errors(workers);
            for (unsigned w = 0; w < workers; ++w)
                pool.emplace_back([&, w] {
                    try {
                        for (std::size_t s = w; s < subsets.size(); s += workers) drive(s);
                    } catch (...) {
                        errors[w] = std::current_exception();
                    }
                });
            for (auto& th : pool) th.join();
            for (auto& e : errors)
                if (e) std::rethrow_exception(e);
        }

        ThreadRow row;
        row.threads = T;
        row.images = images;
        row.makespan_cycles = *std::max_element(stream_cycles.begin(), stream_cycles.end());
        row.seconds = static_cast<double>(row.makespan_cycles) / target.clock_hz();
        const MetricRow m = compute_metrics(static_cast<double>(images) / row.seconds, target.power_w, images,
                                            rep.ops_per_frame);
        row.fps = m.fps;
        row.latency_s = m.latency_s;
        row.achieved_gops = m.achieved_gops;
        row.fps_per_watt = m.efficiency;
        row.bandwidth_mbps_used = static_cast<double>(rep.bytes_per_frame) * static_cast<double>(images) / row.seconds / 1e6;
        if (options.execute && !data->labels.empty()) {
            std::vector<int> labels(data->labels.begin(), data->labels.begin() + images);
            row.accuracy = 100.0 * top1_accuracy(predictions, labels);
        }
        row.visits = std::move(visits);
        rep.rows.push_back(std::move(row));
    }
    return rep;
}

RunReport run_benchmark(const Scenario& scenario, const Cifar10Batch* data, unsigned host_threads) {
    const TargetConfig target = load_target(scenario.target);
    LoadedModel handle = load_model(load_compiled(scenario.model), target);
    BenchmarkOptions opt;
    opt.threads = scenario.threads;
    opt.images = scenario.images;
    opt.stream = scenario.stream_model();
    opt.host_threads = host_threads;
    opt.execute = data != nullptr;
    RunReport rep = run_benchmark(handle, opt, data);
    if (!scenario.baselines.empty()) {
        std::vector<MetricRow> rows = scenario.baselines;
        for (const auto& r : rep.rows) {
            MetricRow m = compute_metrics(r.fps, rep.power_w, r.images, rep.ops_per_frame);
            m.platform = "vdpu-" + std::to_string(r.threads) + "t";
            m.accuracy = r.accuracy;
            rows.push_back(std::move(m));
        }
        rep.comparison = compare_report(rows, scenario.baseline);
    }
    return rep;
}

std::string RunReport::to_text() const {
    std::string out = "model " + model + " on " + target + " (accelerator-side simulated time; host pre/post excluded)\n";
    std::vector<std::vector<std::string>> t;
    t.push_back({"threads", "images", "makespan_cycles", "fps", "latency_s", "gops", "bw_mbps", "fps_per_w", "accuracy"});
    for (const auto& r : rows)
        t.push_back({std::to_string(r.threads), std::to_string(r.images), std::to_string(r.makespan_cycles),
                     fmt("%.2f", r.fps), fmt("%.2f", r.latency_s), fmt("%.3f", r.achieved_gops),
                     fmt("%.2f", r.bandwidth_mbps_used), fmt("%.2f", r.fps_per_watt),
                     r.accuracy ? fmt("%.2f", *r.accuracy) : "-"});
    out += aligned(t);
    if (comparison) out += "\n" + comparison->to_text();
    return out;
}

std::string RunReport::to_csv() const {
    std::ostringstream os;
    os << "threads,images,makespan_cycles,fps,latency_s,achieved_gops,bandwidth_mbps_used,fps_per_watt,accuracy\n";
    for (const auto& r : rows)
        os << r.threads << ',' << r.images << ',' << r.makespan_cycles << ',' << fmt("%.4f", r.fps) << ','
           << fmt("%.6f", r.latency_s) << ',' << fmt("%.6f", r.achieved_gops) << ','
           << fmt("%.4f", r.bandwidth_mbps_used) << ',' << fmt("%.4f", r.fps_per_watt) << ','
           << (r.accuracy ? fmt("%.4f", *r.accuracy) : "") << '\n';
    return os.str();
}

}  // namespace vdpu
