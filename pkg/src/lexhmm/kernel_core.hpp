// Sampling kernel core.  Mirrors lexhmm/_kernel_py.py operation for
// operation: same random draws in the same order and the same floating point
// expressions in the same association, so results are bit-identical.  Build
// without -ffast-math and with -ffp-contract=off.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace lexhmm {

typedef long long i64;
typedef std::vector<std::pair<int, int> > HistVec;  // (size, count), ascending size

enum { G_TRANS = 0, G_EMIT = 1, G_CHAR = 2 };
enum { LV_TRI = 0, LV_BI, LV_UNI, LV_EMIT, LV_CBI, LV_CUNI, N_LEVELS };
enum { SLOT_REMOVE = 0, SLOT_CLASS = 1, SLOT_SELECT = 2, SLOT_PARTICLE = 3 };

const uint64_t GOLDEN = 0x9E3779B97F4A7C15ULL;

inline uint64_t mix64(uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

inline uint64_t derive(uint64_t key, uint64_t slot) {
    return mix64(key ^ mix64((slot + 1) * GOLDEN));
}

struct Stream {
    uint64_t state;
    explicit Stream(uint64_t key = 0) : state(key) {}
    uint64_t next64() {
        state += GOLDEN;
        uint64_t s = state;
        s = (s ^ (s >> 30)) * 0xBF58476D1CE4E5B9ULL;
        s = (s ^ (s >> 27)) * 0x94D049BB133111EBULL;
        return s ^ (s >> 31);
    }
    double uniform() { return (double)(next64() >> 11) * (1.0 / 9007199254740992.0); }
};

struct Move {
    int g;
    i64 r;
    i64 key;
    int frm;
    int to;
};
typedef std::vector<Move> Journal;

inline void hist_dec(HistVec& h, int s, int g, i64 r, i64 key) {
    for (size_t i = 0; i < h.size(); ++i) {
        if (h[i].first == s) {
            if (--h[i].second == 0) h.erase(h.begin() + i);
            return;
        }
    }
    throw std::runtime_error("group " + std::to_string(g) + " restaurant " + std::to_string(r) +
                             " key " + std::to_string(key) + ": no table of size " + std::to_string(s));
}

inline void hist_inc(HistVec& h, int s) {
    size_t i = 0;
    while (i < h.size() && h[i].first < s) ++i;
    if (i < h.size() && h[i].first == s)
        ++h[i].second;
    else
        h.insert(h.begin() + i, std::make_pair(s, 1));
}

struct Group {
    i64 D = 0;
    std::vector<i64> rn, rK;
    std::vector<int> cd, kd;                  // dense over keys r*D + d
    std::unordered_map<i64, HistVec> hist;    // only keys with customers

    void reset(size_t n_rest, i64 dishes) {
        D = dishes;
        rn.assign(n_rest, 0);
        rK.assign(n_rest, 0);
        cd.assign(n_rest * (size_t)dishes, 0);
        kd.assign(n_rest * (size_t)dishes, 0);
        hist.clear();
    }
    void clear() {
        std::fill(rn.begin(), rn.end(), 0);
        std::fill(rK.begin(), rK.end(), 0);
        std::fill(cd.begin(), cd.end(), 0);
        std::fill(kd.begin(), kd.end(), 0);
        hist.clear();
    }
};

struct KeyDelta {
    int dc = 0;
    int dk = 0;
    bool own = false;   // h holds the full histogram for this key
    HistVec h;
};

typedef std::pair<i64, i64> RestDelta;   // (dn, dK)

inline void reset_value(KeyDelta& v) {
    v.dc = v.dk = 0;
    v.own = false;
    v.h.clear();
}

inline void reset_value(RestDelta& v) { v = RestDelta(0, 0); }

// Open-addressing map from nonnegative keys, used for particle overlays.
// Clearing and copying cost O(entries) rather than O(capacity), so a pooled
// map that once grew large stays cheap for later small sweeps.
template <class V>
class FlatMap {
public:
    FlatMap() { rebuild(16); }

    V* find(i64 key) {
        size_t i = slot(key);
        while (full_[i]) {
            if (keys_[i] == key) return &vals_[i];
            i = (i + 1) & mask_;
        }
        return nullptr;
    }
    const V* find(i64 key) const { return const_cast<FlatMap*>(this)->find(key); }

    V& operator[](i64 key) {
        if (2 * (used_.size() + 1) > keys_.size()) grow();
        size_t i = slot(key);
        while (full_[i]) {
            if (keys_[i] == key) return vals_[i];
            i = (i + 1) & mask_;
        }
        full_[i] = 1;
        keys_[i] = key;
        used_.push_back(i);
        return vals_[i];
    }

    void clear() {
        for (size_t i : used_) {
            full_[i] = 0;
            reset_value(vals_[i]);
        }
        used_.clear();
    }

    void assign(const FlatMap& o) {
        clear();
        if (keys_.size() != o.keys_.size()) rebuild(o.keys_.size());
        for (size_t i : o.used_) {
            full_[i] = 1;
            keys_[i] = o.keys_[i];
            vals_[i] = o.vals_[i];
        }
        used_ = o.used_;
    }

private:
    std::vector<i64> keys_;
    std::vector<V> vals_;
    std::vector<unsigned char> full_;
    std::vector<size_t> used_;
    size_t mask_ = 0;
    int shift_ = 0;

    size_t slot(i64 key) const { return (size_t)(((uint64_t)key * GOLDEN) >> shift_) & mask_; }

    void rebuild(size_t cap) {
        keys_.assign(cap, 0);
        vals_.assign(cap, V());
        full_.assign(cap, 0);
        used_.clear();
        mask_ = cap - 1;
        shift_ = 64;
        for (size_t c = cap; c > 1; c >>= 1) --shift_;
    }

    void grow() {
        std::vector<std::pair<i64, V> > old;
        old.reserve(used_.size());
        for (size_t i : used_) old.emplace_back(keys_[i], std::move(vals_[i]));
        rebuild(keys_.size() * 2);
        for (auto& kv : old) (*this)[kv.first] = std::move(kv.second);
    }
};

struct Particle {
    FlatMap<KeyDelta> keys[3];
    FlatMap<RestDelta> rests[3];
    Journal journal;
    std::vector<int> tags, inc, e, cls;
    double logw = 0.0;
    Stream rng;

    // empties the overlay but keeps allocated buckets and capacity
    void reset() {
        for (int g = 0; g < 3; ++g) {
            keys[g].clear();
            rests[g].clear();
        }
        journal.clear();
    }

    void copy_state(const Particle& o) {
        for (int g = 0; g < 3; ++g) {
            keys[g].assign(o.keys[g]);
            rests[g].assign(o.rests[g]);
        }
        journal = o.journal;
        tags = o.tags;
        logw = o.logw;
        inc = o.inc;
        e = o.e;
        cls = o.cls;
    }
};

struct Level {
    i64 r;
    int lvl;
};

static const HistVec EMPTY_HIST;

class Core {
public:
    int T, T1, BOUND, W, N, A, A1;
    bool charlm;
    i64 R_tri, r_uni;
    std::vector<int> tokens, start, end_;
    std::vector<std::vector<int> > chars;
    Group grp[3];
    std::vector<int> tags;
    std::vector<unsigned char> allowed;
    std::vector<int> e_count;
    double pa[N_LEVELS], pbs[N_LEVELS];
    double p_tag0, p_char0;
    // site lists (CSR)
    std::vector<int> site_ptr, site_idx;
    // current type sweep
    std::vector<int> mark;
    int cur_w = -1;
    std::vector<int> sites;
    std::vector<std::vector<int> > ops;
    std::vector<std::vector<Journal> > removal;
    std::vector<int> old_tags;
    std::vector<Particle> pool, spare;   // reused across type sweeps

    Core(int n_tags, const std::vector<int>& toks, const std::vector<i64>& offsets, int n_words,
         const std::vector<std::vector<int> >& word_chars, int n_chars, bool use_charlm)
        : T(n_tags), T1(n_tags + 1), BOUND(n_tags), W(n_words), N((int)toks.size()),
          A(n_chars), A1(n_chars + 1), charlm(use_charlm), tokens(toks), chars(word_chars) {
        if (charlm && (int)chars.size() != W) throw std::invalid_argument("character LM needs word_chars");
        start.assign(N, 0);
        end_.assign(N, 0);
        for (size_t s = 0; s + 1 < offsets.size(); ++s)
            for (i64 j = offsets[s]; j < offsets[s + 1]; ++j) {
                start[j] = (int)offsets[s];
                end_[j] = (int)offsets[s + 1];
            }
        R_tri = (i64)T1 * T1;
        r_uni = R_tri + T1;
        grp[G_TRANS].reset((size_t)(R_tri + T1 + 1), T1);
        grp[G_EMIT].reset((size_t)T, W);
        grp[G_CHAR].reset((size_t)(T * A1 + T), A1);
        tags.assign(N, 0);
        allowed.assign((size_t)W * T, 0);
        e_count.assign(T, 0);
        for (int i = 0; i < N_LEVELS; ++i) {
            pa[i] = 0.5;
            pbs[i] = 1.0;
        }
        p_tag0 = 1.0 / T1;
        p_char0 = 1.0 / A1;
        mark.assign(N, -1);
        site_ptr.assign(W + 1, 0);
        for (int j = 0; j < N; ++j) {
            if (tokens[j] < 0 || tokens[j] >= W) throw std::invalid_argument("token id out of range");
            ++site_ptr[tokens[j] + 1];
        }
        for (int w = 0; w < W; ++w) site_ptr[w + 1] += site_ptr[w];
        site_idx.assign(N, 0);
        std::vector<int> fill(site_ptr.begin(), site_ptr.end() - 1);
        for (int j = 0; j < N; ++j) site_idx[fill[tokens[j]]++] = j;
    }

    // ------------------------------------------------------------- setup
    void set_word_class(int w, const std::vector<int>& cls) {
        if (w < 0 || w >= W) throw std::invalid_argument("word type out of range");
        size_t base = (size_t)w * T;
        for (int t = 0; t < T; ++t)
            if (allowed[base + t]) {
                --e_count[t];
                allowed[base + t] = 0;
            }
        for (int t : cls) {
            if (t < 0 || t >= T) throw std::invalid_argument("tag " + std::to_string(t) + " out of range");
            if (!allowed[base + t]) {
                allowed[base + t] = 1;
                ++e_count[t];
            }
        }
    }

    int level_of(int g, i64 r) const {
        if (g == G_TRANS) {
            if (r < R_tri) return LV_TRI;
            return r < r_uni ? LV_BI : LV_UNI;
        }
        if (g == G_EMIT) return LV_EMIT;
        return r < (i64)T * A1 ? LV_CBI : LV_CUNI;
    }

    // ------------------------------------------------------- count access
    double pred(int g, i64 r, i64 key, int lvl, double pb, const Particle* ov) const {
        const Group& G = grp[g];
        i64 n = G.rn[r];
        i64 K = G.rK[r];
        i64 c = G.cd[key];
        i64 k = G.kd[key];
        if (ov) {
            if (const RestDelta* rd = ov->rests[g].find(r)) {
                n += rd->first;
                K += rd->second;
            }
            if (const KeyDelta* kd = ov->keys[g].find(key)) {
                c += kd->dc;
                k += kd->dk;
            }
        }
        if (n == 0) return pb;
        double a = pa[lvl], b = pbs[lvl];
        return ((double)c - a * (double)k + (a * (double)K + b) * pb) / ((double)n + b);
    }

    const HistVec& hist_of(int g, i64 key, const Particle* ov) const {
        if (ov) {
            const KeyDelta* kd = ov->keys[g].find(key);
            if (kd && kd->own) return kd->h;
        }
        auto it = grp[g].hist.find(key);
        return it == grp[g].hist.end() ? EMPTY_HIST : it->second;
    }

    void move(int g, i64 r, i64 key, int frm, int to, Particle* ov) {
        Group& G = grp[g];
        int dc = to - frm;
        int dk = (to > 0) - (frm > 0);
        if (!ov) {
            HistVec& h = G.hist[key];
            if (frm > 0) hist_dec(h, frm, g, r, key);
            if (to > 0) hist_inc(h, to);
            int v = G.cd[key] + dc;
            if (v == 0) {
                G.cd[key] = 0;
                G.kd[key] = 0;
                G.hist.erase(key);
            } else {
                G.cd[key] = v;
                G.kd[key] += dk;
            }
            G.rn[r] += dc;
            G.rK[r] += dk;
        } else {
            KeyDelta& kd = ov->keys[g][key];
            if (!kd.own) {
                auto it = G.hist.find(key);
                if (it != G.hist.end()) kd.h = it->second;
                kd.own = true;
            }
            if (frm > 0) hist_dec(kd.h, frm, g, r, key);
            if (to > 0) hist_inc(kd.h, to);
            kd.dc += dc;
            kd.dk += dk;
            RestDelta& rd = ov->rests[g][r];
            rd.first += dc;
            rd.second += dk;
        }
    }

    i64 customers(int g, i64 key, const Particle* ov) const {
        i64 c = grp[g].cd[key];
        if (ov) {
            if (const KeyDelta* kd = ov->keys[g].find(key)) c += kd->dc;
        }
        return c;
    }

    // ------------------------------------------------------------- chains
    int trans_chain(int t2, int t1, Level* out) const {
        out[0].r = (i64)t2 * T1 + t1;
        out[0].lvl = LV_TRI;
        out[1].r = R_tri + t1;
        out[1].lvl = LV_BI;
        out[2].r = r_uni;
        out[2].lvl = LV_UNI;
        return 3;
    }

    int char_chain(int t, int prev, Level* out) const {
        out[0].r = (i64)t * A1 + prev;
        out[0].lvl = LV_CBI;
        out[1].r = (i64)T * A1 + t;
        out[1].lvl = LV_CUNI;
        return 2;
    }

    void probs(int g, const Level* chain, int L, int d, double p0, const Particle* ov, double* out) const {
        i64 D = grp[g].D;
        double p = out[L] = p0;
        for (int i = L - 1; i >= 0; --i) p = out[i] = pred(g, chain[i].r, chain[i].r * D + d, chain[i].lvl, p, ov);
    }

    bool seat_chain(int g, const Level* chain, int L, int d, const double* pr, Particle* ov, Stream& rng,
                    Journal& journal) {
        i64 D = grp[g].D;
        for (int i = 0; i < L; ++i) {
            i64 r = chain[i].r;
            i64 key = r * D + d;
            i64 c = customers(g, key, ov);
            int frm = 0;
            if (c > 0) {
                double a = pa[chain[i].lvl], b = pbs[chain[i].lvl];
                i64 K = grp[g].rK[r];
                i64 k = grp[g].kd[key];
                if (ov) {
                    if (const RestDelta* rd = ov->rests[g].find(r)) K += rd->second;
                    if (const KeyDelta* kd = ov->keys[g].find(key)) k += kd->dk;
                }
                double w_new = (a * (double)K + b) * pr[i + 1];
                double x = rng.uniform() * ((double)c - a * (double)k + w_new);
                const HistVec& h = hist_of(g, key, ov);
                for (size_t m = 0; m < h.size(); ++m) {
                    double w = ((double)h[m].first - a) * (double)h[m].second;
                    if (x < w) {
                        frm = h[m].first;
                        break;
                    }
                    x -= w;
                }
            }
            move(g, r, key, frm, frm + 1, ov);
            journal.push_back(Move{g, r, key, frm, frm + 1});
            if (frm > 0) return false;
        }
        return true;
    }

    bool unseat_chain(int g, const Level* chain, int L, int d, Particle* ov, Stream& rng, Journal& journal) {
        i64 D = grp[g].D;
        for (int i = 0; i < L; ++i) {
            i64 r = chain[i].r;
            i64 key = r * D + d;
            const HistVec& h = hist_of(g, key, ov);
            i64 c = customers(g, key, ov);
            if (c <= 0)
                throw std::runtime_error("group " + std::to_string(g) + " restaurant " + std::to_string(r) +
                                         ": unseat of unserved dish " + std::to_string(d));
            double x = rng.uniform() * (double)c;
            int frm = h.back().first;
            for (size_t m = 0; m < h.size(); ++m) {
                i64 w = (i64)h[m].first * h[m].second;
                if (x < (double)w) {
                    frm = h[m].first;
                    break;
                }
                x -= (double)w;
            }
            move(g, r, key, frm, frm - 1, ov);
            journal.push_back(Move{g, r, key, frm, frm - 1});
            if (frm != 1) return false;
        }
        return true;
    }

    // ------------------------------------------------------ probabilities
    double trans_prob(int t2, int t1, int t, const Particle* ov) const {
        double p = pred(G_TRANS, r_uni, r_uni * T1 + t, LV_UNI, p_tag0, ov);
        i64 r = R_tri + t1;
        p = pred(G_TRANS, r, r * T1 + t, LV_BI, p, ov);
        r = (i64)t2 * T1 + t1;
        return pred(G_TRANS, r, r * T1 + t, LV_TRI, p, ov);
    }

    double char_prob(int t, int prev, int c, const Particle* ov) const {
        i64 r = (i64)T * A1 + t;
        double p = pred(G_CHAR, r, r * A1 + c, LV_CUNI, p_char0, ov);
        r = (i64)t * A1 + prev;
        return pred(G_CHAR, r, r * A1 + c, LV_CBI, p, ov);
    }

    double char_word_prob(int t, int w, const Particle* ov) const {
        double prod = 1.0;
        int prev = A;
        for (int c : chars[w]) {
            prod *= char_prob(t, prev, c, ov);
            prev = c;
        }
        prod *= char_prob(t, prev, A, ov);
        return prod;
    }

    double word_base_prob(int t, int w, const Particle* ov) const {
        int e;
        if (ov && w == cur_w) {
            if (!ov->inc[t]) return 0.0;
            e = ov->e[t];
        } else {
            if (!allowed[(size_t)w * T + t]) return 0.0;
            e = e_count[t];
        }
        if (charlm) return char_word_prob(t, w, ov);
        return 1.0 / (double)e;
    }

    double emit_prob(int t, int w, const Particle* ov) const {
        return pred(G_EMIT, t, (i64)t * W + w, LV_EMIT, word_base_prob(t, w, ov), ov);
    }

    // --------------------------------------------------------- seating ops
    double seat_trans(int t2, int t1, int t0, Particle* ov, Stream& rng, Journal& journal) {
        Level chain[3];
        double pr[4];
        trans_chain(t2, t1, chain);
        probs(G_TRANS, chain, 3, t0, p_tag0, ov, pr);
        seat_chain(G_TRANS, chain, 3, t0, pr, ov, rng, journal);
        return pr[0];
    }

    double seat_emit(int t, int w, Particle* ov, Stream& rng, Journal& journal) {
        double pb = word_base_prob(t, w, ov);
        Level chain[1] = {{(i64)t, LV_EMIT}};
        double pr[2];
        probs(G_EMIT, chain, 1, w, pb, ov, pr);
        if (seat_chain(G_EMIT, chain, 1, w, pr, ov, rng, journal) && charlm) {
            int prev = A;
            const std::vector<int>& cs = chars[w];
            for (size_t i = 0; i <= cs.size(); ++i) {
                int c = i < cs.size() ? cs[i] : A;
                Level cc[2];
                double cp[3];
                char_chain(t, prev, cc);
                probs(G_CHAR, cc, 2, c, p_char0, ov, cp);
                seat_chain(G_CHAR, cc, 2, c, cp, ov, rng, journal);
                prev = c;
            }
        }
        return pr[0];
    }

    void unseat_trans(int t2, int t1, int t0, Stream& rng, Journal& journal) {
        Level chain[3];
        trans_chain(t2, t1, chain);
        unseat_chain(G_TRANS, chain, 3, t0, nullptr, rng, journal);
    }

    void unseat_emit(int t, int w, Stream& rng, Journal& journal) {
        Level chain[1] = {{(i64)t, LV_EMIT}};
        if (unseat_chain(G_EMIT, chain, 1, w, nullptr, rng, journal) && charlm) {
            std::vector<int> seq;
            seq.push_back(A);
            seq.insert(seq.end(), chars[w].begin(), chars[w].end());
            seq.push_back(A);
            for (size_t i = seq.size() - 1; i > 0; --i) {
                Level cc[2];
                char_chain(t, seq[i - 1], cc);
                unseat_chain(G_CHAR, cc, 2, seq[i], nullptr, rng, journal);
            }
        }
    }

    void replay(const Journal& moves, Particle* ov, Journal& journal) {
        for (size_t i = moves.size(); i-- > 0;) {
            const Move& m = moves[i];
            move(m.g, m.r, m.key, m.to, m.frm, ov);
            journal.push_back(Move{m.g, m.r, m.key, m.to, m.frm});
        }
    }

    void apply(const Journal& moves) {
        for (const Move& m : moves) move(m.g, m.r, m.key, m.frm, m.to, nullptr);
    }

    void revert(const Journal& moves) {
        for (size_t i = moves.size(); i-- > 0;) {
            const Move& m = moves[i];
            move(m.g, m.r, m.key, m.to, m.frm, nullptr);
        }
    }

    int tag_base(int j, int lo, int hi) const {
        if (j < lo || j >= hi) return BOUND;
        return tags[j];
    }

    // --------------------------------------------------------- initialise
    void initialize(uint64_t key) {
        for (int g = 0; g < 3; ++g) grp[g].clear();
        Stream rng(key);
        Journal journal;
        int j = 0;
        while (j < N) {
            int lo = start[j], hi = end_[j];
            for (int k = lo; k <= hi; ++k) {
                seat_trans(tag_base(k - 2, lo, hi), tag_base(k - 1, lo, hi), tag_base(k, lo, hi), nullptr, rng,
                           journal);
                if (k < hi) seat_emit(tags[k], tokens[k], nullptr, rng, journal);
                journal.clear();
            }
            j = hi;
        }
    }

    // --------------------------------------------------------- local Gibbs
    int local_sweep(uint64_t key) {
        Stream rng(key);
        int rejected = 0;
        std::vector<int> cand;
        std::vector<double> q;
        for (int j = 0; j < N; ++j) {
            int w = tokens[j];
            int lo = start[j], hi = end_[j];
            int z0 = tags[j];
            int ks[3];
            int nk = 0;
            for (int k = j; k <= j + 2; ++k)
                if (k <= hi) ks[nk++] = k;
            std::vector<Journal> removal;
            double a_old[4];
            Journal jr;
            unseat_emit(z0, w, rng, jr);
            removal.push_back(jr);
            a_old[nk] = emit_prob(z0, w, nullptr);
            for (int m = nk - 1; m >= 0; --m) {
                int k = ks[m];
                jr.clear();
                int a2 = tag_base(k - 2, lo, hi), a1 = tag_base(k - 1, lo, hi), a0 = tag_base(k, lo, hi);
                unseat_trans(a2, a1, a0, rng, jr);
                removal.push_back(jr);
                a_old[m] = trans_prob(a2, a1, a0, nullptr);
            }
            std::reverse(removal.begin(), removal.end());
            cand.clear();
            for (int t = 0; t < T; ++t)
                if (allowed[(size_t)w * T + t]) cand.push_back(t);
            q.clear();
            for (int z : cand) {
                tags[j] = z;
                double prod = 1.0;
                for (int m = 0; m < nk; ++m) {
                    int k = ks[m];
                    prod *= trans_prob(tag_base(k - 2, lo, hi), tag_base(k - 1, lo, hi), tag_base(k, lo, hi), nullptr);
                }
                prod *= emit_prob(z, w, nullptr);
                q.push_back(prod);
            }
            double total = 0.0;
            for (double v : q) total += v;
            double x = rng.uniform() * total;
            int zi = (int)q.size() - 1;
            for (size_t i = 0; i < q.size(); ++i) {
                if (x < q[i]) {
                    zi = (int)i;
                    break;
                }
                x -= q[i];
            }
            int z = cand[zi];
            double qz = q[zi];
            double qz0 = q[std::find(cand.begin(), cand.end(), z0) - cand.begin()];
            tags[j] = z;
            Journal seated;
            double a_new = 1.0;
            for (int m = 0; m < nk; ++m) {
                int k = ks[m];
                a_new *= seat_trans(tag_base(k - 2, lo, hi), tag_base(k - 1, lo, hi), tag_base(k, lo, hi), nullptr,
                                    rng, seated);
            }
            a_new *= seat_emit(z, w, nullptr, rng, seated);
            double a0 = 1.0;
            for (int m = 0; m <= nk; ++m) a0 *= a_old[m];
            if (a_new != qz || a0 != qz0) {
                double log_r = (std::log(a_new) - std::log(qz)) - (std::log(a0) - std::log(qz0));
                if (log_r < 0.0 && std::log(rng.uniform()) >= log_r) {
                    revert(seated);
                    tags[j] = z0;
                    for (const Journal& r : removal) revert(r);
                    ++rejected;
                }
            }
        }
        return rejected;
    }

    // ---------------------------------------------------------- type sweep
    void remove_type(int w, uint64_t key) {
        if (w < 0 || w >= W) throw std::invalid_argument("word type out of range");
        if (cur_w >= 0) throw std::logic_error("type sweep already in progress");
        sites.assign(site_idx.begin() + site_ptr[w], site_idx.begin() + site_ptr[w + 1]);
        cur_w = w;
        for (size_t i = 0; i < sites.size(); ++i) mark[sites[i]] = (int)i;
        ops.assign(sites.size(), std::vector<int>());
        for (size_t i = 0; i < sites.size(); ++i) {
            int j = sites[i], hi = end_[j];
            for (int k = j; k <= j + 2; ++k) {
                if (k > hi) break;
                if (k > j && k < hi && mark[k] >= 0) break;
                ops[i].push_back(k);
            }
        }
        old_tags.resize(sites.size());
        for (size_t i = 0; i < sites.size(); ++i) old_tags[i] = tags[sites[i]];
        Stream rng(derive(key, SLOT_REMOVE));
        removal.assign(sites.size(), std::vector<Journal>());
        for (size_t i = sites.size(); i-- > 0;) {
            int j = sites[i], lo = start[j], hi = end_[j];
            const std::vector<int>& ks = ops[i];
            std::vector<Journal>& per = removal[i];
            per.assign(ks.size() + 1, Journal());
            unseat_emit(tags[j], w, rng, per[ks.size()]);
            for (size_t m = ks.size(); m-- > 0;) {
                int k = ks[m];
                unseat_trans(tag_base(k - 2, lo, hi), tag_base(k - 1, lo, hi), tag_base(k, lo, hi), rng, per[m]);
            }
        }
    }

    void finish_type() {
        for (int j : sites) mark[j] = -1;
        cur_w = -1;
        sites.clear();
        ops.clear();
        removal.clear();
    }

    void restore_type() {
        for (const auto& per : removal)
            for (const Journal& jr : per) revert(jr);
        finish_type();
    }

    int tag_p(int j, int lo, int hi, const std::vector<int>& ptags) const {
        if (j < lo || j >= hi) return BOUND;
        int m = mark[j];
        if (m >= 0) return ptags[m];
        return tags[j];
    }

    void site_step(Particle& part, int i, bool forced, std::vector<double>& q) {
        int w = cur_w;
        int j = sites[i], lo = start[j], hi = end_[j];
        const std::vector<int>& ks = ops[i];
        std::vector<int>& ptags = part.tags;
        q.clear();
        for (int z : part.cls) {
            ptags[i] = z;
            double prod = 1.0;
            for (int k : ks)
                prod *= trans_prob(tag_p(k - 2, lo, hi, ptags), tag_p(k - 1, lo, hi, ptags), tag_p(k, lo, hi, ptags),
                                   &part);
            prod *= emit_prob(z, w, &part);
            q.push_back(prod);
        }
        double total = 0.0;
        for (double v : q) total += v;
        int zi, z;
        if (forced) {
            z = old_tags[i];
            zi = (int)(std::find(part.cls.begin(), part.cls.end(), z) - part.cls.begin());
            if (zi == (int)part.cls.size()) throw std::runtime_error("replayed tag outside particle 0's class");
        } else {
            double x = part.rng.uniform() * total;
            zi = (int)q.size() - 1;
            for (size_t m = 0; m < q.size(); ++m) {
                if (x < q[m]) {
                    zi = (int)m;
                    break;
                }
                x -= q[m];
            }
            z = part.cls[zi];
        }
        ptags[i] = z;
        double a = 1.0;
        if (forced) {
            const std::vector<Journal>& moves = removal[i];
            for (size_t m = 0; m < ks.size(); ++m) {
                int k = ks[m];
                a *= trans_prob(tag_p(k - 2, lo, hi, ptags), tag_p(k - 1, lo, hi, ptags), tag_p(k, lo, hi, ptags), &part);
                replay(moves[m], &part, part.journal);
            }
            a *= emit_prob(z, w, &part);
            replay(moves[ks.size()], &part, part.journal);
        } else {
            for (int k : ks)
                a *= seat_trans(tag_p(k - 2, lo, hi, ptags), tag_p(k - 1, lo, hi, ptags), tag_p(k, lo, hi, ptags),
                                &part, part.rng, part.journal);
            a *= seat_emit(z, w, &part, part.rng, part.journal);
        }
        part.logw += std::log(total);
        double qz = q[zi];
        if (a != qz) part.logw += std::log(a) - std::log(qz);
    }

    static void weights(const std::vector<Particle>& parts, std::vector<double>& ws) {
        double m = parts[0].logw;
        for (const Particle& p : parts)
            if (p.logw > m) m = p.logw;
        ws.resize(parts.size());
        for (size_t p = 0; p < parts.size(); ++p) ws[p] = std::exp(parts[p].logw - m);
    }

    static int draw(const std::vector<double>& ws, double total, Stream& rng) {
        double x = rng.uniform() * total;
        int last = 0;
        for (size_t p = 0; p < ws.size(); ++p) {
            double v = ws[p];
            if (v > 0.0) {
                if (x < v) return (int)p;
                last = (int)p;
            }
            x -= v;
        }
        return last;
    }

    // Returns the selected slot; fills final log weights and the chosen class.
    int propagate_type(const std::vector<std::vector<int> >& classes, const std::vector<double>& logw, uint64_t key,
                       double threshold, std::vector<double>& out_logw, int& n_resample,
                       std::vector<int>& chosen_cls) {
        int w = cur_w;
        if (w < 0) throw std::logic_error("propagate_type without remove_type");
        int P = (int)classes.size();
        if (P < 1 || (int)logw.size() != P) throw std::invalid_argument("need one log weight per particle class");
        int n = (int)sites.size();
        if ((int)pool.size() < P) {
            pool.resize(P);
            spare.resize(P);
        }
        std::vector<Particle>& parts = pool;
        for (int p = 0; p < P; ++p) {
            Particle& part = parts[p];
            part.reset();
            part.cls = classes[p];
            part.inc.assign(T, 0);
            for (int t : part.cls) {
                if (t < 0 || t >= T) throw std::invalid_argument("class tag out of range");
                part.inc[t] = 1;
            }
            part.e.resize(T);
            for (int t = 0; t < T; ++t) part.e[t] = e_count[t] - allowed[(size_t)w * T + t] + part.inc[t];
            part.tags.assign(n, 0);
            part.logw = logw[p];
            part.rng = Stream(derive(key, SLOT_PARTICLE + p));
        }
        Stream sel_rng(derive(key, SLOT_SELECT));
        n_resample = 0;
        std::vector<double> ws, q;
        std::vector<int> anc;
        for (int i = 0; i < n; ++i) {
            for (int p = 0; p < P; ++p) site_step(parts[p], i, p == 0, q);
            if (threshold > 0.0 && P > 1 && i < n - 1) {
                weights(parts, ws);
                double s1 = 0.0, s2 = 0.0;
                for (double v : ws) {
                    s1 += v;
                    s2 += v * v;
                }
                if (s1 * s1 / s2 < threshold * (double)P) {
                    ++n_resample;
                    anc.assign(P, 0);
                    for (int p = 1; p < P; ++p) anc[p] = draw(ws, s1, sel_rng);
                    // slot 0 survives in place; copies keep their own slot's stream
                    for (int p = 1; p < P; ++p) {
                        spare[p].copy_state(parts[anc[p]]);
                        spare[p].rng = parts[p].rng;
                    }
                    for (int p = 1; p < P; ++p) std::swap(parts[p], spare[p]);
                    for (int p = 0; p < P; ++p) parts[p].logw = 0.0;
                }
            }
        }
        weights(parts, ws);
        double s1 = 0.0;
        for (double v : ws) s1 += v;
        int sel = draw(ws, s1, sel_rng);
        Particle& chosen = parts[sel];
        apply(chosen.journal);
        for (int i = 0; i < n; ++i) tags[sites[i]] = chosen.tags[i];
        out_logw.resize(P);
        for (int p = 0; p < P; ++p) out_logw[p] = parts[p].logw;
        chosen_cls = chosen.cls;
        finish_type();
        return sel;
    }

    // ------------------------------------------------------------ state I/O
    std::vector<i64> export_hist(int g) const {
        const Group& G = grp[g];
        std::vector<i64> keys;
        keys.reserve(G.hist.size());
        for (const auto& kv : G.hist) keys.push_back(kv.first);
        std::sort(keys.begin(), keys.end());
        std::vector<i64> rows;
        for (i64 key : keys) {
            const HistVec& h = G.hist.at(key);
            for (const auto& sc : h) {
                rows.push_back(key / G.D);
                rows.push_back(key % G.D);
                rows.push_back(sc.first);
                rows.push_back(sc.second);
            }
        }
        return rows;
    }

    void import_hist(int g, const std::vector<i64>& rows) {
        Group& G = grp[g];
        G.clear();
        for (size_t i = 0; i + 3 < rows.size(); i += 4) {
            i64 r = rows[i], d = rows[i + 1];
            int s = (int)rows[i + 2], c = (int)rows[i + 3];
            if (r < 0 || r >= (i64)G.rn.size() || d < 0 || d >= G.D || s < 1 || c < 1)
                throw std::invalid_argument("histogram row out of range");
            i64 key = r * G.D + d;
            HistVec& h = G.hist[key];
            for (int m = 0; m < c; ++m) hist_inc(h, s);
            G.cd[key] += s * c;
            G.kd[key] += c;
            G.rn[r] += (i64)s * c;
            G.rK[r] += c;
        }
    }

    void level_stats(int lvl, std::vector<i64>& ns, std::vector<i64>& Ks, std::map<int, i64>& agg) const {
        int g = lvl <= LV_UNI ? G_TRANS : (lvl == LV_EMIT ? G_EMIT : G_CHAR);
        const Group& G = grp[g];
        for (size_t r = 0; r < G.rn.size(); ++r)
            if (level_of(g, (i64)r) == lvl && G.rn[r] > 0) {
                ns.push_back(G.rn[r]);
                Ks.push_back(G.rK[r]);
            }
        for (const auto& kv : G.hist)
            if (level_of(g, kv.first / G.D) == lvl)
                for (const auto& sc : kv.second) agg[sc.first] += sc.second;
    }
};

}  // namespace lexhmm
