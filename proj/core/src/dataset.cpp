#include "alc/dataset.hpp"

#include <bit>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

static_assert(std::endian::native == std::endian::little,
              "raw sample files are little-endian");

namespace alc {
namespace {

using nlohmann::json;

void write_file(const std::filesystem::path& p, const void* data, std::size_t n) {
    std::ofstream f(p, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open for write: " + p.string());
    f.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
    if (!f) throw std::runtime_error("short write: " + p.string());
}

std::vector<char> read_file(const std::filesystem::path& p, std::size_t expect) {
    std::ifstream f(p, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open: " + p.string());
    std::vector<char> buf(expect);
    f.read(buf.data(), static_cast<std::streamsize>(expect));
    if (f.gcount() != static_cast<std::streamsize>(expect) || f.peek() != EOF)
        throw std::runtime_error("unexpected size: " + p.string());
    return buf;
}

std::vector<float> image_to_f32(const Tensor& img) {
    std::vector<float> out(img.data.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<float>(img.data[i]);
    return out;
}

}  // namespace

const char* quality_name(Quality q) { return q == Quality::kHq ? "hq" : "lq"; }

Quality quality_from_name(const std::string& s) {
    if (s == "hq") return Quality::kHq;
    if (s == "lq") return Quality::kLq;
    throw std::invalid_argument("unknown quality tag: " + s);
}

const Sample* Dataset::find(const std::string& id) const {
    for (const auto& s : samples)
        if (s.id == id) return &s;
    return nullptr;
}

std::vector<const Sample*> Dataset::by_quality(Quality q) const {
    std::vector<const Sample*> out;
    for (const auto& s : samples)
        if (s.quality == q) out.push_back(&s);
    return out;
}

void save_dataset(const Dataset& ds, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    json man;
    man["h"] = ds.h;
    man["w"] = ds.w;
    man["n_classes"] = ds.n_classes;
    man["seed"] = ds.seed;
    man["split_seed"] = ds.split_seed;
    man["hq_ratio"] = ds.hq_ratio;
    man["noise_min_px"] = ds.noise_min_px;
    man["noise_max_px"] = ds.noise_max_px;
    man["samples"] = json::array();
    for (const auto& s : ds.samples) {
        if (s.image.rank() != 2 || s.image.dim(0) != ds.h || s.image.dim(1) != ds.w)
            throw std::invalid_argument("sample image shape mismatch: " + s.id);
        if (s.label.h != ds.h || s.label.w != ds.w)
            throw std::invalid_argument("sample label shape mismatch: " + s.id);
        auto it = ds.clean_labels.find(s.id);
        if (it == ds.clean_labels.end())
            throw std::invalid_argument("missing clean label: " + s.id);

        man["samples"].push_back({{"id", s.id}, {"quality", quality_name(s.quality)}});
        const auto f32 = image_to_f32(s.image);
        write_file(dir / (s.id + ".img"), f32.data(), f32.size() * sizeof(float));
        write_file(dir / (s.id + ".lab"), s.label.v.data(), s.label.v.size());
        write_file(dir / (s.id + ".clean"), it->second.v.data(), it->second.v.size());
    }
    std::ofstream f(dir / "manifest.json", std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write manifest in " + dir.string());
    f << man.dump(2) << '\n';
}

Dataset load_dataset(const std::filesystem::path& dir) {
    std::ifstream f(dir / "manifest.json");
    if (!f) throw std::runtime_error("no manifest.json in " + dir.string());
    json man = json::parse(f);

    Dataset ds;
    ds.h = man.at("h").get<int>();
    ds.w = man.at("w").get<int>();
    ds.n_classes = man.at("n_classes").get<int>();
    ds.seed = man.at("seed").get<std::uint64_t>();
    ds.split_seed = man.value("split_seed", std::uint64_t{0});
    ds.hq_ratio = man.value("hq_ratio", 0.0);
    ds.noise_min_px = man.value("noise_min_px", 0);
    ds.noise_max_px = man.value("noise_max_px", 0);
    if (ds.h <= 0 || ds.w <= 0 || ds.n_classes < 2)
        throw std::runtime_error("bad manifest dims in " + dir.string());

    const std::size_t px = static_cast<std::size_t>(ds.h) * ds.w;
    for (const auto& e : man.at("samples")) {
        Sample s;
        s.id = e.at("id").get<std::string>();
        s.quality = quality_from_name(e.at("quality").get<std::string>());

        const auto img = read_file(dir / (s.id + ".img"), px * sizeof(float));
        s.image = Tensor::zeros({ds.h, ds.w});
        const float* fp = reinterpret_cast<const float*>(img.data());
        for (std::size_t i = 0; i < px; ++i) s.image.data[i] = fp[i];

        auto load_lab = [&](const char* ext) {
            const auto raw = read_file(dir / (s.id + ext), px);
            LabelGrid g(ds.h, ds.w);
            g.v.assign(raw.begin(), raw.end());
            for (auto v : g.v)
                if (v >= ds.n_classes)
                    throw std::runtime_error("label out of range in " + s.id + ext);
            return g;
        };
        s.label = load_lab(".lab");
        ds.clean_labels[s.id] = load_lab(".clean");
        ds.samples.push_back(std::move(s));
    }
    return ds;
}

std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t h) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 1099511628211ull;
    }
    return h;
}

std::uint64_t dataset_fingerprint(const Dataset& ds) {
    std::uint64_t h = kFnvOffset;
    const std::int32_t dims[3] = {ds.h, ds.w, ds.n_classes};
    h = fnv1a(dims, sizeof(dims), h);
    for (const auto& s : ds.samples) {
        h = fnv1a(s.id.data(), s.id.size(), h);
        const unsigned char q = s.quality == Quality::kHq ? 1 : 0;
        h = fnv1a(&q, 1, h);
        const auto f32 = image_to_f32(s.image);
        h = fnv1a(f32.data(), f32.size() * sizeof(float), h);
        h = fnv1a(s.label.v.data(), s.label.v.size(), h);
        if (auto it = ds.clean_labels.find(s.id); it != ds.clean_labels.end())
            h = fnv1a(it->second.v.data(), it->second.v.size(), h);
    }
    return h;
}

}  // namespace alc
