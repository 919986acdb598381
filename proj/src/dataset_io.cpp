#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "gradnest/dataset.hpp"

namespace gradnest::data {

namespace {

// 17 significant digits round-trip doubles exactly.
std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

class LineReader {
public:
    explicit LineReader(const std::string& path) : path_(path), in_(path) {
        if (!in_) throw ParseError(path + ": cannot open");
    }

    bool try_line(std::string& out) {
        while (std::getline(in_, out)) {
            ++line_;
            if (!out.empty() && out.back() == '\r') out.pop_back();
            if (!out.empty()) return true;
        }
        return false;
    }

    std::string line(const char* what) {
        std::string s;
        if (!try_line(s)) fail(std::string("unexpected end of file, expected ") + what);
        return s;
    }

    [[noreturn]] void fail(const std::string& msg) const {
        throw ParseError(path_ + ":" + std::to_string(line_) + ": " + msg);
    }

    int line_no() const { return line_; }

private:
    std::string path_;
    std::ifstream in_;
    int line_ = 0;
};

double parse_double(LineReader& r, std::istringstream& ss, const char* what) {
    // std::stod accepts "inf" (strip widths); istream extraction does not.
    std::string tok;
    if (!(ss >> tok)) r.fail(std::string("expected number: ") + what);
    try {
        std::size_t used = 0;
        const double v = std::stod(tok, &used);
        if (used != tok.size()) throw std::invalid_argument(tok);
        return v;
    } catch (const std::exception&) {
        r.fail(std::string("expected number: ") + what + " (got '" + tok + "')");
    }
}

long parse_long(LineReader& r, std::istringstream& ss, const char* what) {
    long v;
    if (!(ss >> v)) r.fail(std::string("expected integer: ") + what);
    return v;
}

void write_poly_record(std::ostream& os, const geom::Polygon& p) {
    os << p.id << "\n" << p.vertices.size() << "\n";
    for (const auto& v : p.vertices) os << fmt(v.x) << " " << fmt(v.y) << "\n";
}

geom::Polygon read_poly_record(LineReader& r, int id, long nverts) {
    geom::Polygon p;
    p.id = id;
    if (nverts < 3) r.fail("polygon needs at least 3 vertices");
    p.vertices.reserve(static_cast<std::size_t>(nverts));
    for (long k = 0; k < nverts; ++k) {
        std::istringstream ss(r.line("vertex"));
        const double x = parse_double(r, ss, "x");
        const double y = parse_double(r, ss, "y");
        p.vertices.push_back({x, y});
    }
    return p;
}

void write_pool_body(std::ostream& os, const PolygonPool& pool) {
    os << "pool " << pool.polygons.size() << "\n";
    for (std::size_t i = 0; i < pool.polygons.size(); ++i) {
        os << "polygon " << pool.polygons[i].id << " " << family_name(pool.tags[i]) << " "
           << pool.polygons[i].vertices.size() << "\n";
        for (const auto& v : pool.polygons[i].vertices) os << fmt(v.x) << " " << fmt(v.y) << "\n";
    }
}

PolygonPool read_pool_body(LineReader& r) {
    PolygonPool pool;
    std::istringstream head(r.line("pool header"));
    std::string tag;
    head >> tag;
    if (tag != "pool") r.fail("expected 'pool <count>'");
    const long count = parse_long(r, head, "pool size");
    for (long i = 0; i < count; ++i) {
        std::istringstream ss(r.line("polygon header"));
        std::string kw, fam;
        long id, nv;
        if (!(ss >> kw >> id >> fam >> nv) || kw != "polygon") r.fail("expected 'polygon <id> <family> <n>'");
        pool.polygons.push_back(read_poly_record(r, static_cast<int>(id), nv));
        pool.tags.push_back(family_from_name(fam));
    }
    return pool;
}

void write_ids(std::ostream& os, std::span<const int> ids) {
    for (std::size_t i = 0; i < ids.size(); ++i) os << (i ? " " : "") << ids[i];
    os << "\n";
}

std::vector<int> read_ids(LineReader& r, long count) {
    std::vector<int> out;
    if (count == 0) return out;
    std::istringstream ss(r.line("id list"));
    out.reserve(static_cast<std::size_t>(count));
    for (long i = 0; i < count; ++i) out.push_back(static_cast<int>(parse_long(r, ss, "id")));
    return out;
}

}  // namespace

void save_pool(const PolygonPool& pool, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error(path + ": cannot write");
    os << "gradnest-pool 1\n";
    write_pool_body(os, pool);
}

PolygonPool load_pool(const std::string& path) {
    LineReader r(path);
    if (r.line("header") != "gradnest-pool 1") r.fail("bad header, expected 'gradnest-pool 1'");
    return read_pool_body(r);
}

void save_polygons(std::span<const geom::Polygon> polys, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error(path + ": cannot write");
    for (const auto& p : polys) write_poly_record(os, p);
}

std::vector<geom::Polygon> load_polygons(const std::string& path) {
    LineReader r(path);
    std::vector<geom::Polygon> out;
    std::string first;
    while (r.try_line(first)) {
        std::istringstream ss(first);
        long id;
        if (!(ss >> id)) r.fail("expected polygon id");
        std::istringstream ns(r.line("vertex count"));
        const long nv = parse_long(r, ns, "vertex count");
        out.push_back(read_poly_record(r, static_cast<int>(id), nv));
    }
    return out;
}

void save_dataset(const Dataset& ds, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error(path + ": cannot write");
    os << "gradnest-dataset 1\n";
    write_pool_body(os, ds.pool);
    os << "split train " << ds.train_shape_ids.size() << "\n";
    write_ids(os, ds.train_shape_ids);
    os << "split test " << ds.test_shape_ids.size() << "\n";
    write_ids(os, ds.test_shape_ids);
    os << "records " << ds.records.size() << "\n";
    for (const auto& rec : ds.records) {
        os << "record " << (rec.split == Split::train ? "train" : "test") << "\n";
        const auto& c = rec.instance.container;
        os << "container " << (c.kind == geom::Container::Kind::strip ? "strip" : "rect") << " "
           << fmt(c.height) << " " << fmt(c.width) << "\n";
        os << "items " << rec.instance.polygon_ids.size() << "\n";
        write_ids(os, rec.instance.polygon_ids);
        os << "placements\n";
        for (const auto& p : rec.solution.placements) os << fmt(p.x) << " " << fmt(p.y) << "\n";
        os << "metrics " << fmt(rec.solution.used_width) << " " << fmt(rec.solution.utilization) << "\n";
    }
}

Dataset load_dataset(const std::string& path) {
    LineReader r(path);
    if (r.line("header") != "gradnest-dataset 1") r.fail("bad header, expected 'gradnest-dataset 1'");
    Dataset ds;
    ds.pool = read_pool_body(r);

    for (int s = 0; s < 2; ++s) {
        std::istringstream ss(r.line("split header"));
        std::string kw, which;
        if (!(ss >> kw >> which) || kw != "split") r.fail("expected 'split <name> <count>'");
        const long count = parse_long(r, ss, "split size");
        auto ids = read_ids(r, count);
        if (which == "train") ds.train_shape_ids = std::move(ids);
        else if (which == "test") ds.test_shape_ids = std::move(ids);
        else r.fail("unknown split name: " + which);
    }

    std::istringstream rs(r.line("records header"));
    std::string kw;
    rs >> kw;
    if (kw != "records") r.fail("expected 'records <count>'");
    const long nrec = parse_long(r, rs, "record count");
    ds.records.reserve(static_cast<std::size_t>(nrec));

    for (long i = 0; i < nrec; ++i) {
        DatasetRecord rec;
        {
            std::istringstream ss(r.line("record header"));
            std::string k, split;
            if (!(ss >> k >> split) || k != "record") r.fail("expected 'record <split>'");
            if (split == "train") rec.split = Split::train;
            else if (split == "test") rec.split = Split::test;
            else r.fail("unknown record split: " + split);
        }
        {
            std::istringstream ss(r.line("container"));
            std::string k, kind;
            if (!(ss >> k >> kind) || k != "container") r.fail("expected 'container <kind> <h> <w>'");
            auto& c = rec.instance.container;
            if (kind == "strip") c.kind = geom::Container::Kind::strip;
            else if (kind == "rect") c.kind = geom::Container::Kind::rectangle;
            else r.fail("unknown container kind: " + kind);
            c.height = parse_double(r, ss, "height");
            c.width = parse_double(r, ss, "width");
        }
        {
            std::istringstream ss(r.line("items"));
            std::string k;
            if (!(ss >> k) || k != "items") r.fail("expected 'items <n>'");
            const long n = parse_long(r, ss, "item count");
            rec.instance.polygon_ids = read_ids(r, n);
        }
        if (r.line("placements") != "placements") r.fail("expected 'placements'");
        rec.solution.placements.reserve(rec.instance.polygon_ids.size());
        for (std::size_t k = 0; k < rec.instance.polygon_ids.size(); ++k) {
            std::istringstream ss(r.line("placement"));
            geom::Placement p;
            p.x = parse_double(r, ss, "x");
            p.y = parse_double(r, ss, "y");
            rec.solution.placements.push_back(p);
        }
        {
            std::istringstream ss(r.line("metrics"));
            std::string k;
            if (!(ss >> k) || k != "metrics") r.fail("expected 'metrics <used_width> <utilization>'");
            rec.solution.used_width = parse_double(r, ss, "used_width");
            rec.solution.utilization = parse_double(r, ss, "utilization");
        }
        ds.records.push_back(std::move(rec));
    }
    return ds;
}

}  // namespace gradnest::data
