#include "stablevel/io.hpp"

#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "stablevel/errors.hpp"

namespace svl {

namespace {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

std::ofstream open_out(const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw IoError("cannot open '" + path.string() + "' for writing");
    return out;
}

std::ifstream open_in(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open '" + path.string() + "' for reading");
    return in;
}

template <class T>
void put(std::ostream& out, T value)
{
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <class T>
T get(std::istream& in, const std::filesystem::path& path)
{
    T value{};
    if (!in.read(reinterpret_cast<char*>(&value), sizeof(T)))
        throw IoError("'" + path.string() + "' is truncated");
    return value;
}

void finish(std::ofstream& out, const std::filesystem::path& path)
{
    out.flush();
    if (!out)
        throw IoError("write to '" + path.string() + "' failed");
}

}  // namespace

std::string format_double(double v)
{
    std::array<char, 32> buf{};
    const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), ptr);
}

std::uintmax_t svl_size(std::size_t n, std::size_t d, bool labeled)
{
    return 16 + (labeled ? 4 * n : 0) + 4 * n * d;
}

void write_svl(const std::filesystem::path& path,
               const Matrix& points,
               std::span<const int> labels,
               std::uint32_t num_classes)
{
    if (num_classes > 0)
    {
        require_same_size(points.rows(), labels.size(), "write_svl: labels");
        for (int l : labels)
            if (l < 0 || static_cast<std::uint32_t>(l) >= num_classes)
                throw LabelError("write_svl: label " + std::to_string(l) + " out of range");
    }
    auto out = open_out(path);
    out.write("SVL1", 4);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(points.rows()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(points.cols()));
    put<std::uint32_t>(out, num_classes);
    if (num_classes > 0)
        for (int l : labels)
            put<std::uint32_t>(out, static_cast<std::uint32_t>(l));
    std::vector<float> buffer(points.flat().size());
    for (std::size_t i = 0; i < buffer.size(); ++i)
        buffer[i] = static_cast<float>(points.flat()[i]);
    out.write(reinterpret_cast<const char*>(buffer.data()), static_cast<std::streamsize>(buffer.size() * 4));
    finish(out, path);
}

Dataset read_svl(const std::filesystem::path& path)
{
    auto in = open_in(path);
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, "SVL1", 4) != 0)
        throw IoError("'" + path.string() + "' is not an SVL1 file");
    const auto n = get<std::uint32_t>(in, path);
    const auto d = get<std::uint32_t>(in, path);
    Dataset ds;
    ds.num_classes = get<std::uint32_t>(in, path);
    std::error_code ec;
    const auto actual = std::filesystem::file_size(path, ec);
    if (!ec && actual != svl_size(n, d, ds.num_classes > 0))
        throw IoError("'" + path.string() + "' has " + std::to_string(actual) + " bytes, header implies "
                      + std::to_string(svl_size(n, d, ds.num_classes > 0)));
    if (ds.num_classes > 0)
    {
        ds.labels.resize(n);
        for (auto& l : ds.labels)
        {
            const auto raw = get<std::uint32_t>(in, path);
            if (raw >= ds.num_classes)
                throw LabelError("'" + path.string() + "' contains label " + std::to_string(raw)
                                 + " but declares " + std::to_string(ds.num_classes) + " classes");
            l = static_cast<int>(raw);
        }
    }
    std::vector<float> buffer(static_cast<std::size_t>(n) * d);
    if (!in.read(reinterpret_cast<char*>(buffer.data()), static_cast<std::streamsize>(buffer.size() * 4)))
        throw IoError("'" + path.string() + "' is truncated");
    ds.points = Matrix(n, d, std::vector<double>(buffer.begin(), buffer.end()));
    return ds;
}

Json spec_to_json(const GmmSpec& spec)
{
    Json j;
    j["dim"] = spec.dim;
    j["weights"] = spec.weights;
    Json means = Json::array(), vars = Json::array();
    for (std::size_t k = 0; k < spec.modes(); ++k)
    {
        means.push_back(Vector(spec.means.row(k).begin(), spec.means.row(k).end()));
        vars.push_back(Vector(spec.variances.row(k).begin(), spec.variances.row(k).end()));
    }
    j["means"] = std::move(means);
    j["variances"] = std::move(vars);
    if (spec.labels)
        j["labels"] = *spec.labels;
    return j;
}

GmmSpec spec_from_json(const Json& j)
{
    try
    {
        GmmSpec spec;
        spec.dim = j.at("dim").get<std::size_t>();
        spec.weights = j.at("weights").get<Vector>();
        const std::size_t k = spec.weights.size();
        spec.means = Matrix(0, spec.dim);
        spec.variances = Matrix(0, spec.dim);
        const auto& means = j.at("means");
        const auto& vars = j.at("variances");
        if (means.size() != k || vars.size() != k)
            throw DataError("spec: means/variances must have one row per weight");
        for (std::size_t i = 0; i < k; ++i)
        {
            const auto m = means[i].get<Vector>();
            const auto v = vars[i].get<Vector>();
            if (m.size() != spec.dim || v.size() != spec.dim)
                throw ShapeError("spec: row " + std::to_string(i) + " does not have dim entries");
            spec.means.push_row(m);
            spec.variances.push_row(v);
        }
        if (j.contains("labels"))
            spec.labels = j.at("labels").get<std::vector<int>>();
        spec.validate();
        return spec;
    }
    catch (const Json::exception& e)
    {
        throw DataError(std::string("spec JSON: ") + e.what());
    }
}

void save_spec(const std::filesystem::path& path, const GmmSpec& spec)
{
    write_text(path, spec_to_json(spec).dump(1) + "\n");
}

GmmSpec load_spec(const std::filesystem::path& path)
{
    return spec_from_json(read_json(path));
}

Json arch_to_json(const ModelArch& arch)
{
    return Json{{"dim", arch.dim},
                {"time_features", arch.time_features},
                {"hidden", arch.hidden},
                {"num_classes", arch.num_classes},
                {"embed_dim", arch.embed_dim},
                {"representation_layer", arch.representation_layer}};
}

ModelArch arch_from_json(const Json& j)
{
    ModelArch a;
    try
    {
        a.dim = j.value("dim", a.dim);
        a.time_features = j.value("time_features", a.time_features);
        a.hidden = j.value("hidden", a.hidden);
        a.num_classes = j.value("num_classes", a.num_classes);
        a.embed_dim = j.value("embed_dim", a.embed_dim);
        a.representation_layer = j.value("representation_layer", a.representation_layer);
    }
    catch (const Json::exception& e)
    {
        throw ConfigError(std::string("model architecture: ") + e.what());
    }
    return a;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt)
{
    Json header;
    header["format"] = "svl-checkpoint-1";
    header["arch"] = arch_to_json(ckpt.arch);
    header["seed"] = ckpt.seed;
    header["iteration"] = ckpt.iteration;
    header["parameters"] = ckpt.params.size();
    header["optimizer"] = ckpt.optimizer.has_value();
    if (ckpt.optimizer)
        header["optimizer_steps"] = ckpt.optimizer->steps();
    header["extra"] = ckpt.extra;
    const std::string text = header.dump();

    auto out = open_out(path);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(text.size()));
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    auto block = [&](const Vector& v) {
        out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * 8));
    };
    block(ckpt.params);
    if (ckpt.optimizer)
    {
        block(ckpt.optimizer->first_moment());
        block(ckpt.optimizer->second_moment());
    }
    finish(out, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path)
{
    auto in = open_in(path);
    const auto len = get<std::uint32_t>(in, path);
    std::string text(len, '\0');
    if (!in.read(text.data(), len))
        throw IoError("'" + path.string() + "' is truncated");
    Checkpoint ckpt;
    Json header;
    try
    {
        header = Json::parse(text);
        if (header.at("format") != "svl-checkpoint-1")
            throw IoError("'" + path.string() + "' has an unknown checkpoint format");
        ckpt.arch = arch_from_json(header.at("arch"));
        ckpt.seed = header.at("seed").get<std::uint64_t>();
        ckpt.iteration = header.at("iteration").get<std::size_t>();
        ckpt.extra = header.value("extra", Json::object());
    }
    catch (const Json::exception& e)
    {
        throw IoError("'" + path.string() + "' header: " + e.what());
    }
    const std::size_t count = header.at("parameters").get<std::size_t>();
    if (count != ckpt.arch.parameter_count())
        throw IoError("'" + path.string() + "' parameter count does not match its architecture");
    auto block = [&] {
        Vector v(count);
        if (!in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(count * 8)))
            throw IoError("'" + path.string() + "' is truncated");
        return v;
    };
    ckpt.params = block();
    if (header.value("optimizer", false))
    {
        Vector m = block();
        Vector v = block();
        AdamW opt(count);
        opt.restore(std::move(m), std::move(v), header.at("optimizer_steps").get<std::uint64_t>());
        ckpt.optimizer = opt;
    }
    return ckpt;
}

std::string metrics_header(const std::vector<double>& probe_times)
{
    std::string h = "iteration,loss";
    for (double t : probe_times)
        h += ",lmse@" + format_double(t);
    return h;
}

std::string metrics_line(const MetricsRow& row, std::size_t probe_count)
{
    std::string line = std::to_string(row.iteration) + "," + format_double(row.loss);
    for (std::size_t k = 0; k < probe_count; ++k)
    {
        line += ",";
        if (k < row.lmse.size())
            line += format_double(row.lmse[k]);
    }
    return line;
}

void write_metrics_csv(const std::filesystem::path& path, const MetricsLog& log)
{
    std::string text = metrics_header(log.probe_times) + "\n";
    for (const auto& row : log.rows)
        text += metrics_line(row, log.probe_times.size()) + "\n";
    write_text(path, text);
}

void write_curve_csv(const std::filesystem::path& path, const VarianceCurve& curve)
{
    std::string text = "t,value,stderr,q15,q85,normalization,estimator,d,n_if_stablevm\n";
    for (std::size_t i = 0; i < curve.t.size(); ++i)
    {
        text += format_double(curve.t[i]) + "," + format_double(curve.values[i]) + ","
                + format_double(curve.stderr_[i]) + "," + format_double(curve.q15[i]) + ","
                + format_double(curve.q85[i]) + "," + to_string(curve.normalization) + ","
                + to_string(curve.estimator) + "," + std::to_string(curve.dim) + ","
                + (curve.n > 0 ? std::to_string(curve.n) : std::string()) + "\n";
    }
    write_text(path, text);
}

VarianceCurve read_curve_csv(const std::filesystem::path& path)
{
    auto in = open_in(path);
    std::string line;
    if (!std::getline(in, line) || line.rfind("t,value,stderr", 0) != 0)
        throw IoError("'" + path.string() + "' is not a variance curve CSV");
    VarianceCurve curve;
    while (std::getline(in, line))
    {
        if (line.empty())
            continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ','))
            cells.push_back(cell);
        if (cells.size() < 8)
            throw IoError("'" + path.string() + "' has a malformed row");
        curve.t.push_back(std::stod(cells[0]));
        curve.values.push_back(std::stod(cells[1]));
        curve.stderr_.push_back(std::stod(cells[2]));
        curve.q15.push_back(std::stod(cells[3]));
        curve.q85.push_back(std::stod(cells[4]));
        curve.normalization = normalization_from_string(cells[5]);
        curve.estimator = estimator_from_string(cells[6]);
        curve.dim = std::stoul(cells[7]);
        curve.n = cells.size() > 8 && !cells[8].empty() ? std::stoul(cells[8]) : 0;
    }
    return curve;
}

Json read_json(const std::filesystem::path& path)
{
    auto in = open_in(path);
    try
    {
        return Json::parse(in);
    }
    catch (const Json::exception& e)
    {
        throw ConfigError("'" + path.string() + "': " + e.what());
    }
}

void write_text(const std::filesystem::path& path, const std::string& text)
{
    auto out = open_out(path);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    finish(out, path);
}

}  // namespace svl
