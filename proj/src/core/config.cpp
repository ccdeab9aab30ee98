#include "stego/core/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "stego/core/errors.hpp"

namespace stego {

namespace {

std::string trim(std::string s) {
    const char* ws = " \t\r\n";
    auto b = s.find_first_not_of(ws);
    if (b == std::string::npos) return {};
    auto e = s.find_last_not_of(ws);
    return s.substr(b, e - b + 1);
}

std::string fmt_double(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
    T value{};
    const char* first = text.data();
    const char* last = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last) fail(ErrorKind::Config, "bad value '" + text + "' for key " + key);
    return value;
}

bool parse_bool(const std::string& key, const std::string& text) {
    if (text == "true" || text == "1" || text == "yes") return true;
    if (text == "false" || text == "0" || text == "no") return false;
    fail(ErrorKind::Config, "bad boolean '" + text + "' for key " + key);
}

struct Field {
    std::function<void(RunConfig&, const std::string&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

template <typename T>
Field number_field(T RunConfig::*member) {
    return {[member](RunConfig& c, const std::string& k, const std::string& v) { c.*member = parse_number<T>(k, v); },
            [member](const RunConfig& c) {
                if constexpr (std::is_floating_point_v<T>) {
                    return fmt_double(c.*member);
                } else {
                    return std::to_string(c.*member);
                }
            }};
}

Field weight_field(double LossWeights::*member) {
    return {[member](RunConfig& c, const std::string& k, const std::string& v) {
                c.loss_weights.*member = parse_number<double>(k, v);
            },
            [member](const RunConfig& c) { return fmt_double(c.loss_weights.*member); }};
}

Field string_field(std::string RunConfig::*member) {
    return {[member](RunConfig& c, const std::string&, const std::string& v) { c.*member = v; },
            [member](const RunConfig& c) { return c.*member; }};
}

Field bool_field(bool RunConfig::*member) {
    return {[member](RunConfig& c, const std::string& k, const std::string& v) { c.*member = parse_bool(k, v); },
            [member](const RunConfig& c) { return std::string(c.*member ? "true" : "false"); }};
}

const std::vector<std::pair<std::string, Field>>& field_table() {
    static const std::vector<std::pair<std::string, Field>> table = [] {
        std::vector<std::pair<std::string, Field>> t;
        t.emplace_back("d", number_field(&RunConfig::d));
        t.emplace_back("image_size",
                       Field{[](RunConfig& c, const std::string& k, const std::string& v) {
                                 auto x = v.find('x');
                                 if (x == std::string::npos) fail(ErrorKind::Config, "image_size must be HxW");
                                 c.image_height = parse_number<int>(k, trim(v.substr(0, x)));
                                 c.image_width = parse_number<int>(k, trim(v.substr(x + 1)));
                             },
                             [](const RunConfig& c) {
                                 return std::to_string(c.image_height) + "x" + std::to_string(c.image_width);
                             }});
        t.emplace_back("seed", number_field(&RunConfig::seed));
        t.emplace_back("learning_rate", number_field(&RunConfig::learning_rate));
        t.emplace_back("alpha1", weight_field(&LossWeights::alpha1));
        t.emplace_back("alpha2", weight_field(&LossWeights::alpha2));
        t.emplace_back("alpha3", weight_field(&LossWeights::alpha3));
        t.emplace_back("alpha4", weight_field(&LossWeights::alpha4));
        t.emplace_back("tau1", number_field(&RunConfig::tau1));
        t.emplace_back("tau2", number_field(&RunConfig::tau2));
        t.emplace_back("max_iterations", number_field(&RunConfig::max_iterations));
        t.emplace_back("dataset_path", string_field(&RunConfig::dataset_path));
        t.emplace_back("checkpoint_path", string_field(&RunConfig::checkpoint_path));
        t.emplace_back("batch_size", number_field(&RunConfig::batch_size));
        t.emplace_back("weight_decay", number_field(&RunConfig::weight_decay));
        t.emplace_back("grad_clip", number_field(&RunConfig::grad_clip));
        t.emplace_back("ema_decay", number_field(&RunConfig::ema_decay));
        t.emplace_back("lse_enabled", bool_field(&RunConfig::lse_enabled));
        t.emplace_back("transforms_enabled", bool_field(&RunConfig::transforms_enabled));
        t.emplace_back("perceptual", string_field(&RunConfig::perceptual));
        t.emplace_back("log_interval", number_field(&RunConfig::log_interval));
        t.emplace_back("checkpoint_interval", number_field(&RunConfig::checkpoint_interval));
        t.emplace_back("probe_size", number_field(&RunConfig::probe_size));
        t.emplace_back("codec_path", string_field(&RunConfig::codec_path));
        t.emplace_back("encoder_width", number_field(&RunConfig::encoder_width));
        t.emplace_back("decoder_width", number_field(&RunConfig::decoder_width));
        t.emplace_back("decoder_head", string_field(&RunConfig::decoder_head));
        t.emplace_back("blur_kernel", number_field(&RunConfig::blur_kernel));
        t.emplace_back("blur_sigma", number_field(&RunConfig::blur_sigma));
        t.emplace_back("noise_mean", number_field(&RunConfig::noise_mean));
        t.emplace_back("noise_sigma", number_field(&RunConfig::noise_sigma));
        t.emplace_back("jpeg_quality", number_field(&RunConfig::jpeg_quality));
        t.emplace_back("codec_steps", number_field(&RunConfig::codec_steps));
        t.emplace_back("codec_batch_size", number_field(&RunConfig::codec_batch_size));
        t.emplace_back("codec_learning_rate", number_field(&RunConfig::codec_learning_rate));
        t.emplace_back("codec_width", number_field(&RunConfig::codec_width));
        t.emplace_back("min_dataset_size", number_field(&RunConfig::min_dataset_size));
        return t;
    }();
    return table;
}

const Field* find_field(const std::string& key) {
    for (const auto& [k, f] : field_table()) {
        if (k == key) return &f;
    }
    return nullptr;
}

}  // namespace

void RunConfig::validate() const {
    auto check = [](bool ok, const std::string& msg) {
        if (!ok) fail(ErrorKind::Config, msg);
    };
    check(d >= 1, "d must be >= 1");
    check(image_height > 0 && image_width > 0 && image_height % 8 == 0 && image_width % 8 == 0,
          "image_size must be positive multiples of 8");
    check(learning_rate > 0.0, "learning_rate must be > 0");
    check(tau1 > 0.0 && tau1 <= tau2 && tau2 <= 1.0, "require 0 < tau1 <= tau2 <= 1");
    check(loss_weights.alpha1 >= 0 && loss_weights.alpha2 >= 0 && loss_weights.alpha3 >= 0 &&
              loss_weights.alpha4 >= 0,
          "loss weights must be >= 0");
    check(max_iterations >= 0, "max_iterations must be >= 0");
    check(batch_size >= 1, "batch_size must be >= 1");
    check(ema_decay >= 0.0 && ema_decay < 1.0, "ema_decay must be in [0,1)");
    check(perceptual == "none" || perceptual == "proxy" || perceptual == "external",
          "perceptual must be none|proxy|external");
    check(decoder_head == "gap" || decoder_head == "flatten", "decoder_head must be gap|flatten");
    check(blur_kernel >= 3 && blur_kernel % 2 == 1, "blur_kernel must be odd and >= 3");
    check(blur_sigma > 0.0, "blur_sigma must be > 0");
    check(noise_sigma >= 0.0, "noise_sigma must be >= 0");
    check(jpeg_quality >= 1 && jpeg_quality <= 100, "jpeg_quality must be in [1,100]");
    check(log_interval >= 1 && checkpoint_interval >= 1, "intervals must be >= 1");
    check(probe_size >= 0, "probe_size must be >= 0");
    check(encoder_width >= 1 && decoder_width >= 1 && codec_width >= 1, "network widths must be >= 1");
}

void RunConfig::set(const std::string& key, const std::string& value) {
    const Field* f = find_field(key);
    if (!f) fail(ErrorKind::Usage, "unknown config key '" + key + "'");
    f->set(*this, key, value);
}

std::string RunConfig::get(const std::string& key) const {
    const Field* f = find_field(key);
    if (!f) fail(ErrorKind::Usage, "unknown config key '" + key + "'");
    return f->get(*this);
}

const std::vector<std::string>& RunConfig::keys() {
    static const std::vector<std::string> ks = [] {
        std::vector<std::string> out;
        for (const auto& [k, f] : field_table()) out.push_back(k);
        return out;
    }();
    return ks;
}

bool RunConfig::has_key(const std::string& key) { return find_field(key) != nullptr; }

std::string RunConfig::to_text() const {
    std::string out;
    for (const auto& [k, f] : field_table()) out += k + " = " + f.get(*this) + "\n";
    return out;
}

RunConfig parse_config(const std::string& text) {
    RunConfig config;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos) fail(ErrorKind::Config, "line " + std::to_string(lineno) + ": expected key = value");
        std::string key = trim(line.substr(0, eq));
        if (!RunConfig::has_key(key)) {
            fail(ErrorKind::Config, "line " + std::to_string(lineno) + ": unknown key '" + key + "'");
        }
        config.set(key, trim(line.substr(eq + 1)));
    }
    config.validate();
    return config;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::Io, "cannot open config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

void save_config(const RunConfig& config, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) fail(ErrorKind::Io, "cannot write config " + path.string());
    out << config.to_text();
}

}  // namespace stego
