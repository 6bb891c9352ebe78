#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "metacmi/harness.hpp"

namespace metacmi {

std::string format_number(double v)
{
    if (std::isnan(v))
        return "";
    if (std::isinf(v))
        return v > 0 ? "inf" : "-inf";
    if (v == 0.0)
        return "0";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

void write_text(const std::string& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw std::runtime_error("cannot write " + path);
    out << text;
    if (!out)
        throw std::runtime_error("failed writing " + path);
}

std::vector<std::string> csv_header()
{
    return {"n_tilde",
            "n",
            "estimator",
            "n_outer",
            "master_seed",
            "train",
            "train_se",
            "meta_pop",
            "meta_pop_se",
            "gap",
            "gap_se",
            "three_loss",
            "three_loss_se",
            "env_cmi",
            "env_cmi_se",
            "task_cmi",
            "task_cmi_se",
            "one_step_cmi",
            "one_step_cmi_se",
            "thm1",
            "thm1_se",
            "thm2",
            "thm2_se",
            "thm3_two_step",
            "thm3_one_step",
            "cor1",
            "cor2_eq7_left",
            "cor2_eq7_right",
            "cor2_eq8",
            "cor3_exp",
            "cor3_linear",
            "cor4_eq16",
            "cor4_eq17",
            "cor5_eq18",
            "cor6_two_step",
            "cor6_one_step",
            "cor6_two_step_display",
            "cor6_one_step_display",
            "delta",
            "thm4_mean",
            "thm4_violation_rate",
            "thm5_mean",
            "thm5_violation_rate",
            "thm6_mean",
            "thm6_violation_rate",
            "remark1_mean",
            "remark1_violation_rate",
            "pointwise_kl",
            "loss_tensor_information",
            "excess_risk",
            "excess_risk_se",
            "oracle_excess_risk",
            "nu",
            "epsilon",
            "cor7",
            "cor8"};
}

std::vector<std::string> csv_fields(const SweepRow& row)
{
    const BoundReport& r = row.report;
    const auto f = format_number;
    std::vector<std::string> v;
    v.push_back(std::to_string(row.n_tilde));
    v.push_back(std::to_string(row.n));
    v.push_back(r.method == EstimatorMethod::exact ? "exact" : "mc");
    v.push_back(std::to_string(r.n_outer));
    v.push_back(std::to_string(r.master_seed));
    for (const Measured* m : {&r.train, &r.meta_population, &r.gap, &r.three_loss, &r.env_cmi, &r.task_cmi,
                              &r.one_step_cmi}) {
        v.push_back(f(m->value));
        v.push_back(f(m->std_error));
    }
    const bool t = r.has_terms;
    v.push_back(t ? f(r.thm1.value) : "");
    v.push_back(t ? f(r.thm1.std_error) : "");
    v.push_back(t ? f(r.thm2.value) : "");
    v.push_back(t ? f(r.thm2.std_error) : "");
    for (double x : {r.thm3_two_step, r.thm3_one_step, r.cor1, r.cor2.all_hypotheses, r.cor2.chained,
                     r.cor2.mutual_information, r.cor3.exponential, r.cor3.linear, r.cor4.two_step, r.cor4.one_step,
                     r.cor5, r.cor6.two_step, r.cor6.one_step, r.cor6.two_step_display, r.cor6.one_step_display})
        v.push_back(f(x));
    if (r.high_probability.empty()) {
        for (int k = 0; k < 9; ++k)
            v.emplace_back();
    } else {
        const auto& h = r.high_probability.front();
        v.push_back(f(h.delta));
        v.push_back(f(h.thm4.value));
        v.push_back(f(h.thm4_coverage.rate));
        v.push_back(f(h.thm5.value));
        v.push_back(f(h.thm5_coverage.rate));
        v.push_back(f(h.thm6.value));
        v.push_back(f(h.thm6_coverage.rate));
        v.push_back(f(h.remark1.value));
        v.push_back(f(h.remark1_coverage.rate));
    }
    v.push_back(f(r.pointwise_kl.value));
    v.push_back(f(r.tensor_information.value));
    v.push_back(f(r.excess_risk.value));
    v.push_back(f(r.excess_risk.std_error));
    v.push_back(f(r.oracle_excess_risk.value));
    v.push_back(f(r.diversity.nu));
    v.push_back(f(r.diversity.epsilon));
    v.push_back(f(r.cor7));
    v.push_back(f(r.cor8));
    return v;
}

namespace {

void append_line(std::string& out, const std::vector<std::string>& fields)
{
    for (std::size_t k = 0; k < fields.size(); ++k) {
        if (k)
            out += ',';
        out += fields[k];
    }
    out += '\n';
}

} // namespace

std::string to_csv(const std::vector<SweepRow>& rows)
{
    if (rows.empty())
        throw std::invalid_argument("no rows to write");
    std::string out;
    append_line(out, csv_header());
    for (const auto& row : rows)
        append_line(out, csv_fields(row));
    return out;
}

void emit_csv(const std::vector<SweepRow>& rows, const std::string& path) { write_text(path, to_csv(rows)); }

nlohmann::json slopes_to_json(const SweepResult& result, std::uint64_t master_seed)
{
    nlohmann::json fits = nlohmann::json::array();
    auto num = [](double v) -> nlohmann::json {
        if (!std::isfinite(v))
            return nullptr;
        return v;
    };
    for (const auto& s : result.slopes)
        fits.push_back({{"family", s.family},
                        {"axis", s.axis},
                        {"fixed", s.fixed},
                        {"points", s.points},
                        {"slope", num(s.slope)},
                        {"intercept", num(s.intercept)},
                        {"residual", num(s.residual)}});
    return {{"master_seed", master_seed}, {"fits", fits}};
}

CsvTable parse_csv(const std::string& text)
{
    CsvTable t;
    std::istringstream in(text);
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty())
            continue;
        std::vector<std::string> fields;
        std::size_t start = 0;
        while (true) {
            const auto comma = line.find(',', start);
            fields.push_back(line.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
            if (comma == std::string::npos)
                break;
            start = comma + 1;
        }
        if (first) {
            t.header = std::move(fields);
            first = false;
        } else {
            if (fields.size() != t.header.size())
                throw std::invalid_argument("CSV row has " + std::to_string(fields.size()) + " fields, header has " +
                                            std::to_string(t.header.size()));
            t.rows.push_back(std::move(fields));
        }
    }
    if (t.header.empty())
        throw std::invalid_argument("CSV has no header");
    return t;
}

CsvTable read_csv(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("cannot open " + path);
    std::ostringstream s;
    s << in.rdbuf();
    return parse_csv(s.str());
}

namespace {

std::size_t column(const CsvTable& t, const std::string& name)
{
    const auto it = std::find(t.header.begin(), t.header.end(), name);
    if (it == t.header.end())
        throw std::invalid_argument("no column named '" + name + "'");
    return static_cast<std::size_t>(it - t.header.begin());
}

bool parse_value(const std::string& s, double& v)
{
    if (s.empty())
        return false;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    return res.ec == std::errc() && std::isfinite(v);
}

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf"};

std::string num(double v)
{
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, std::round(v * 100.0) / 100.0);
    return std::string(buf, res.ptr);
}

std::string escape(const std::string& s)
{
    std::string out;
    for (char c : s) {
        if (c == '<')
            out += "&lt;";
        else if (c == '>')
            out += "&gt;";
        else if (c == '&')
            out += "&amp;";
        else
            out += c;
    }
    return out;
}

} // namespace

std::string render_svg(const CsvTable& table, const PlotSpec& spec)
{
    if (spec.y_columns.empty())
        throw std::invalid_argument("plot needs at least one y column");
    if (spec.x_column.empty())
        throw std::invalid_argument("plot needs an x column");
    const std::size_t xc = column(table, spec.x_column);
    struct Series {
        std::string name;
        std::vector<std::pair<double, double>> points;
    };
    std::vector<Series> series;
    double xmin = INFINITY, xmax = -INFINITY, ymin = INFINITY, ymax = -INFINITY;
    auto tx = [&](double v) { return spec.log_x ? std::log10(v) : v; };
    auto ty = [&](double v) { return spec.log_y ? std::log10(v) : v; };
    for (const auto& name : spec.y_columns) {
        const std::size_t yc = column(table, name);
        Series s{name, {}};
        for (const auto& row : table.rows) {
            double x, y;
            if (!parse_value(row[xc], x) || !parse_value(row[yc], y))
                continue;
            if ((spec.log_x && x <= 0.0) || (spec.log_y && y <= 0.0))
                continue;
            s.points.emplace_back(tx(x), ty(y));
        }
        std::sort(s.points.begin(), s.points.end());
        for (auto [x, y] : s.points) {
            xmin = std::min(xmin, x);
            xmax = std::max(xmax, x);
            ymin = std::min(ymin, y);
            ymax = std::max(ymax, y);
        }
        series.push_back(std::move(s));
    }
    if (!(xmin <= xmax)) {
        xmin = 0.0;
        xmax = 1.0;
        ymin = 0.0;
        ymax = 1.0;
    }
    if (xmax - xmin < 1e-12) {
        xmin -= 0.5;
        xmax += 0.5;
    }
    if (ymax - ymin < 1e-12) {
        ymin -= 0.5;
        ymax += 0.5;
    }
    const double W = 640, H = 420, L = 70, R = 170, T = 40, B = 50;
    auto px = [&](double x) { return L + (x - xmin) / (xmax - xmin) * (W - L - R); };
    auto py = [&](double y) { return H - B - (y - ymin) / (ymax - ymin) * (H - T - B); };

    std::ostringstream s;
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(W) << "\" height=\"" << num(H)
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    if (!spec.title.empty())
        s << "<text x=\"" << num(W / 2) << "\" y=\"20\" text-anchor=\"middle\">" << escape(spec.title) << "</text>\n";
    s << "<line x1=\"" << num(L) << "\" y1=\"" << num(H - B) << "\" x2=\"" << num(W - R) << "\" y2=\"" << num(H - B)
      << "\" stroke=\"black\"/>\n";
    s << "<line x1=\"" << num(L) << "\" y1=\"" << num(T) << "\" x2=\"" << num(L) << "\" y2=\"" << num(H - B)
      << "\" stroke=\"black\"/>\n";
    for (int k = 0; k <= 4; ++k) {
        const double fx = xmin + (xmax - xmin) * k / 4.0;
        const double fy = ymin + (ymax - ymin) * k / 4.0;
        const double lx = spec.log_x ? std::pow(10.0, fx) : fx;
        const double ly = spec.log_y ? std::pow(10.0, fy) : fy;
        s << "<text x=\"" << num(px(fx)) << "\" y=\"" << num(H - B + 16) << "\" text-anchor=\"middle\">"
          << format_number(std::round(lx * 1000.0) / 1000.0) << "</text>\n";
        s << "<text x=\"" << num(L - 6) << "\" y=\"" << num(py(fy) + 4) << "\" text-anchor=\"end\">"
          << format_number(std::round(ly * 1000.0) / 1000.0) << "</text>\n";
    }
    s << "<text x=\"" << num((L + W - R) / 2) << "\" y=\"" << num(H - 12) << "\" text-anchor=\"middle\">"
      << escape(spec.x_column) << (spec.log_x ? " (log)" : "") << "</text>\n";
    for (std::size_t k = 0; k < series.size(); ++k) {
        const char* colour = kPalette[k % (sizeof kPalette / sizeof kPalette[0])];
        const auto& pts = series[k].points;
        if (!pts.empty()) {
            s << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"2\" points=\"";
            for (std::size_t p = 0; p < pts.size(); ++p)
                s << (p ? " " : "") << num(px(pts[p].first)) << "," << num(py(pts[p].second));
            s << "\"/>\n";
            for (auto [x, y] : pts)
                s << "<circle cx=\"" << num(px(x)) << "\" cy=\"" << num(py(y)) << "\" r=\"3\" fill=\"" << colour
                  << "\"/>\n";
        }
        const double ly = T + 18.0 * static_cast<double>(k);
        s << "<line x1=\"" << num(W - R + 10) << "\" y1=\"" << num(ly) << "\" x2=\"" << num(W - R + 30) << "\" y2=\""
          << num(ly) << "\" stroke=\"" << colour << "\" stroke-width=\"2\"/>\n";
        s << "<text x=\"" << num(W - R + 36) << "\" y=\"" << num(ly + 4) << "\">" << escape(series[k].name)
          << (spec.log_y ? " (log)" : "") << "</text>\n";
    }
    s << "</svg>\n";
    return s.str();
}

void emit_svg_plot(const CsvTable& table, const PlotSpec& spec, const std::string& path)
{
    write_text(path, render_svg(table, spec));
}

} // namespace metacmi
