// Copyright (C) 2026 The esddpm Authors
// SPDX-License-Identifier: Apache-2.0

#include "esddpm/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

#include "esddpm/csv.hpp"
#include "esddpm/errors.hpp"

namespace esddpm {

namespace {

constexpr char kMagic[4] = {'E', 'S', 'D', 'D'};

class Writer {
public:
    void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
    void u16(std::uint16_t v) { put(v, 2); }
    void u64(std::uint64_t v) { put(v, 8); }
    void f64(double v) { put(std::bit_cast<std::uint64_t>(v), 8); }
    void bytes(const std::string& s) { buf_ += s; }
    void str(const std::string& s) {
        u64(s.size());
        buf_ += s;
    }
    void matrix(const Matrix& m) {
        u64(static_cast<std::uint64_t>(m.rows()));
        u64(static_cast<std::uint64_t>(m.cols()));
        for (Eigen::Index r = 0; r < m.rows(); ++r) {
            for (Eigen::Index c = 0; c < m.cols(); ++c) {
                f64(m(r, c));
            }
        }
    }
    const std::string& data() const { return buf_; }

private:
    void put(std::uint64_t v, int n) {
        for (int i = 0; i < n; ++i) {
            buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
        }
    }
    std::string buf_;
};

class Reader {
public:
    Reader(std::string_view data, std::string section) : data_(data), section_(std::move(section)) {}

    std::uint8_t u8() { return static_cast<std::uint8_t>(get(1)); }
    std::uint16_t u16() { return static_cast<std::uint16_t>(get(2)); }
    std::uint64_t u64() { return get(8); }
    double f64() { return std::bit_cast<double>(get(8)); }
    std::string_view raw(std::size_t n) {
        need(n);
        auto out = data_.substr(pos_, n);
        pos_ += n;
        return out;
    }
    std::string str() {
        const std::uint64_t n = u64();
        return std::string(raw(static_cast<std::size_t>(n)));
    }
    Matrix matrix() {
        const std::uint64_t rows = u64();
        const std::uint64_t cols = u64();
        fail_unless(rows < (1ULL << 32) && cols < (1ULL << 32), "implausible tensor shape");
        need(static_cast<std::size_t>(rows * cols * 8));
        Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
        for (Eigen::Index r = 0; r < m.rows(); ++r) {
            for (Eigen::Index c = 0; c < m.cols(); ++c) {
                m(r, c) = f64();
            }
        }
        return m;
    }
    Vector vector() {
        Matrix m = matrix();
        fail_unless(m.cols() == 1 || m.size() == 0, "expected a column vector");
        return Vector(Eigen::Map<Vector>(m.data(), m.rows()));
    }
    int count(std::uint64_t limit = 1ULL << 31) {
        const std::uint64_t v = u64();
        fail_unless(v < limit, "implausible count");
        return static_cast<int>(v);
    }
    void finish() const { fail_unless(pos_ == data_.size(), "trailing bytes"); }
    void fail_unless(bool ok, const std::string& what) const {
        if (!ok) {
            throw CorruptCheckpoint("corrupt checkpoint in section '" + section_ + "': " + what);
        }
    }

private:
    void need(std::size_t n) const {
        if (data_.size() - pos_ < n) {
            throw CorruptCheckpoint("corrupt checkpoint in section '" + section_ + "': truncated");
        }
    }
    std::uint64_t get(int n) {
        need(static_cast<std::size_t>(n));
        std::uint64_t v = 0;
        for (int i = 0; i < n; ++i) {
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
        }
        pos_ += static_cast<std::size_t>(n);
        return v;
    }

    std::string_view data_;
    std::string section_;
    std::size_t pos_ = 0;
};

// Schedule: T then T betas.
void write_schedule(Writer& w, const NoiseSchedule& s) {
    w.u64(static_cast<std::uint64_t>(s.horizon()));
    for (double b : s.betas()) {
        w.f64(b);
    }
}

NoiseSchedule read_schedule(Reader& r) {
    const int T = r.count(1ULL << 28);
    std::vector<double> betas(static_cast<std::size_t>(T));
    for (auto& b : betas) {
        b = r.f64();
    }
    try {
        return NoiseSchedule::from_betas(std::move(betas));
    } catch (const Error& e) {
        r.fail_unless(false, e.what());
        throw;
    }
}

void write_tensors(Writer& w, const ParameterTensors& p) {
    w.u64(p.layers.size());
    for (const auto& l : p.layers) {
        w.matrix(l.weight);
        w.matrix(l.bias);
    }
    w.matrix(p.class_embedding);
}

ParameterTensors read_tensors(Reader& r) {
    ParameterTensors p;
    p.layers.resize(static_cast<std::size_t>(r.count(1 << 16)));
    for (auto& l : p.layers) {
        l.weight = r.matrix();
        l.bias = r.vector();
    }
    p.class_embedding = r.matrix();
    return p;
}

void write_network(Writer& w, const Network& net) {
    const NetworkConfig& c = net.config();
    w.u64(static_cast<std::uint64_t>(c.input_dim));
    w.u64(static_cast<std::uint64_t>(c.output_dim));
    w.u64(c.hidden.size());
    for (int h : c.hidden) {
        w.u64(static_cast<std::uint64_t>(h));
    }
    w.u64(static_cast<std::uint64_t>(c.time_embed_dim));
    w.u64(static_cast<std::uint64_t>(c.horizon));
    w.u64(static_cast<std::uint64_t>(c.class_count));
    w.u64(static_cast<std::uint64_t>(c.class_embed_dim));
    w.u8(static_cast<std::uint8_t>(c.activation));
    write_tensors(w, net.params());
}

Network read_network(Reader& r) {
    NetworkConfig c;
    c.input_dim = r.count();
    c.output_dim = r.count();
    c.hidden.resize(static_cast<std::size_t>(r.count(1 << 16)));
    for (int& h : c.hidden) {
        h = r.count();
    }
    c.time_embed_dim = r.count();
    c.horizon = r.count();
    c.class_count = r.count();
    c.class_embed_dim = r.count();
    const std::uint8_t act = r.u8();
    r.fail_unless(act <= 1, "unknown activation");
    c.activation = static_cast<Activation>(act);
    ParameterTensors params = read_tensors(r);
    try {
        return Network(c, std::move(params));
    } catch (const Error& e) {
        r.fail_unless(false, e.what());
        throw;
    }
}

std::string encode_model(const DiffusionModel& m) {
    Writer w;
    w.u64(static_cast<std::uint64_t>(m.trained_horizon));
    w.u8(static_cast<std::uint8_t>(m.sigma_mode));
    write_network(w, m.net);
    return w.data();
}

std::string encode_generator(const BaseGenerator& g) {
    Writer w;
    w.u8(static_cast<std::uint8_t>(g.kind()));
    w.u8(g.conditional() ? 1 : 0);
    w.u64(static_cast<std::uint64_t>(g.class_count()));
    switch (g.kind()) {
        case GeneratorKind::gmm:
            w.u64(g.gmms().size());
            for (const auto& gmm : g.gmms()) {
                w.u64(static_cast<std::uint64_t>(gmm.components()));
                w.matrix(gmm.weights);
                w.matrix(gmm.means);
                w.matrix(gmm.variances);
            }
            break;
        case GeneratorKind::vae:
            w.u64(static_cast<std::uint64_t>(g.vae().latent_dim));
            write_network(w, g.vae().encoder);
            write_network(w, g.vae().decoder);
            break;
        case GeneratorKind::oracle:
            w.f64(g.oracle().jitter);
            w.str(g.oracle().source);
            break;
    }
    return w.data();
}

BaseGenerator decode_generator(Reader& r) {
    const std::uint8_t kind = r.u8();
    const std::uint8_t cond = r.u8();
    const int class_count = r.count();
    r.fail_unless(cond == (class_count > 0 ? 1 : 0), "conditional flag disagrees with class count");
    try {
        switch (kind) {
            case static_cast<std::uint8_t>(GeneratorKind::gmm): {
                std::vector<GmmParams> gmms(static_cast<std::size_t>(r.count(1 << 16)));
                for (auto& gmm : gmms) {
                    const int K = r.count();
                    gmm.weights = r.vector();
                    gmm.means = r.matrix();
                    gmm.variances = r.matrix();
                    r.fail_unless(gmm.components() == K, "component count mismatch");
                }
                r.fail_unless(!gmms.empty(), "no mixtures");
                if (class_count > 0) {
                    r.fail_unless(gmms.size() == static_cast<std::size_t>(class_count), "one mixture per class");
                    return BaseGenerator::from_class_gmms(std::move(gmms));
                }
                r.fail_unless(gmms.size() == 1, "unconditional generator with several mixtures");
                return BaseGenerator::from_gmm(std::move(gmms.front()));
            }
            case static_cast<std::uint8_t>(GeneratorKind::vae): {
                VaeParams vae;
                vae.latent_dim = r.count();
                vae.encoder = read_network(r);
                vae.decoder = read_network(r);
                return BaseGenerator::from_vae(std::move(vae));
            }
            case static_cast<std::uint8_t>(GeneratorKind::oracle): {
                OracleData oracle;
                oracle.jitter = r.f64();
                oracle.source = r.str();
                Dataset ds;
                try {
                    ds = read_samples_csv(oracle.source);
                } catch (const Error& e) {
                    r.fail_unless(false, std::string("oracle dataset unreadable: ") + e.what());
                }
                oracle.data = std::move(ds.data);
                oracle.labels = std::move(ds.labels);
                return BaseGenerator::from_oracle(std::move(oracle), class_count);
            }
            default:
                r.fail_unless(false, "unknown generator kind");
        }
    } catch (const CorruptCheckpoint&) {
        throw;
    } catch (const Error& e) {
        r.fail_unless(false, e.what());
    }
    throw CorruptCheckpoint("unreachable");
}

std::string encode_optimizer(const OptimizerCheckpoint& o) {
    Writer w;
    w.u64(o.adam.step);
    w.f64(o.adam.beta1);
    w.f64(o.adam.beta2);
    w.f64(o.adam.epsilon);
    write_tensors(w, o.adam.first);
    write_tensors(w, o.adam.second);
    w.u64(o.iteration);
    return w.data();
}

OptimizerCheckpoint decode_optimizer(Reader& r) {
    OptimizerCheckpoint o;
    o.adam.step = r.u64();
    o.adam.beta1 = r.f64();
    o.adam.beta2 = r.f64();
    o.adam.epsilon = r.f64();
    o.adam.first = read_tensors(r);
    o.adam.second = read_tensors(r);
    r.fail_unless(o.adam.first.same_shape(o.adam.second), "moment shapes differ");
    o.iteration = r.u64();
    return o;
}

const char* section_name(std::string_view tag) {
    if (tag == "SCHD") return "schedule";
    if (tag == "MODL") return "network";
    if (tag == "GENR") return "generator";
    if (tag == "OPTS") return "optimizer-state";
    return "unknown";
}

bool same_schedule(const NoiseSchedule& a, const NoiseSchedule& b) {
    return std::equal(a.betas().begin(), a.betas().end(), b.betas().begin(), b.betas().end());
}

}  // namespace

std::string encode_checkpoint(const CheckpointBundle& bundle) {
    std::vector<std::pair<std::string, std::string>> sections;
    const NoiseSchedule* schedule = bundle.schedule ? &*bundle.schedule : nullptr;
    if (bundle.model) {
        ESDDPM_CHECK(!schedule || same_schedule(*schedule, bundle.model->schedule), InvalidArgument,
                     "bundle schedule differs from the model's schedule");
        schedule = &bundle.model->schedule;
    }
    if (schedule) {
        Writer w;
        write_schedule(w, *schedule);
        sections.emplace_back("SCHD", w.data());
    }
    if (bundle.model) {
        bundle.model->validate();
        sections.emplace_back("MODL", encode_model(*bundle.model));
    }
    if (bundle.generator) {
        sections.emplace_back("GENR", encode_generator(*bundle.generator));
    }
    if (bundle.optimizer) {
        sections.emplace_back("OPTS", encode_optimizer(*bundle.optimizer));
    }
    Writer w;
    w.bytes(std::string(kMagic, 4));
    w.u16(kCheckpointVersion);
    w.u16(static_cast<std::uint16_t>(sections.size()));
    for (const auto& [tag, payload] : sections) {
        w.bytes(tag);
        w.u64(payload.size());
    }
    for (const auto& [tag, payload] : sections) {
        w.bytes(payload);
    }
    return w.data();
}

CheckpointBundle decode_checkpoint(const std::string& bytes) {
    Reader header(bytes, "header");
    header.fail_unless(header.raw(4) == std::string_view(kMagic, 4), "bad magic");
    const std::uint16_t version = header.u16();
    if (version != kCheckpointVersion) {
        throw CorruptCheckpoint("unsupported checkpoint version " + std::to_string(version) + " (expected " +
                                std::to_string(kCheckpointVersion) + ")");
    }
    const std::uint16_t count = header.u16();
    std::vector<std::pair<std::string, std::uint64_t>> table;
    for (std::uint16_t i = 0; i < count; ++i) {
        std::string tag(header.raw(4));
        table.emplace_back(std::move(tag), header.u64());
    }
    std::size_t offset = 4 + 2 + 2 + static_cast<std::size_t>(count) * 12;
    CheckpointBundle bundle;
    std::optional<std::string_view> model_payload;
    for (const auto& [tag, length] : table) {
        const std::string name = section_name(tag);
        if (bytes.size() < offset || bytes.size() - offset < length) {
            throw CorruptCheckpoint("corrupt checkpoint in section '" + name + "': truncated");
        }
        const std::string_view payload(bytes.data() + offset, static_cast<std::size_t>(length));
        offset += static_cast<std::size_t>(length);
        Reader r(payload, name);
        if (tag == "SCHD") {
            bundle.schedule = read_schedule(r);
        } else if (tag == "MODL") {
            model_payload = payload;
            continue;
        } else if (tag == "GENR") {
            bundle.generator = decode_generator(r);
        } else if (tag == "OPTS") {
            bundle.optimizer = decode_optimizer(r);
        } else {
            r.fail_unless(false, "unknown section tag '" + tag + "'");
        }
        r.finish();
    }
    Reader tail(std::string_view(bytes).substr(std::min(offset, bytes.size())), "trailer");
    tail.finish();
    if (model_payload) {
        Reader r(*model_payload, "network");
        r.fail_unless(bundle.schedule.has_value(), "model without a schedule section");
        DiffusionModel m;
        m.schedule = *bundle.schedule;
        m.trained_horizon = r.count();
        const std::uint8_t sigma = r.u8();
        r.fail_unless(sigma <= 1, "unknown sigma mode");
        m.sigma_mode = static_cast<SigmaMode>(sigma);
        m.net = read_network(r);
        r.finish();
        try {
            m.validate();
        } catch (const Error& e) {
            r.fail_unless(false, e.what());
        }
        bundle.model = std::move(m);
    }
    return bundle;
}

void save_checkpoint(const std::string& path, const CheckpointBundle& bundle) {
    const std::string bytes = encode_checkpoint(bundle);
    std::ofstream out(path, std::ios::binary);
    ESDDPM_CHECK(out.good(), Error, "cannot open '" + path + "' for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    ESDDPM_CHECK(out.good(), Error, "failed writing '" + path + "'");
}

CheckpointBundle load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    ESDDPM_CHECK(in.good(), Error, "cannot open checkpoint '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return decode_checkpoint(ss.str());
}

}  // namespace esddpm
