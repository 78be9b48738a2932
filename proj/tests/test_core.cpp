#include <doctest.h>

#include <set>

#include "aegis/rng.hpp"
#include "aegis/sha256.hpp"

using namespace aegis;

TEST_CASE("sha256 matches FIPS 180-4 test vectors") {
    CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(sha256_hex("abc") ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(sha256_hex("abcdbcdecdefdefgefghfghighijhijkijkljklmklmnlmnomnopnopq") ==
          "248d6a61d20638b8e5c026930c3e6039a33ce45964ff2167f6ecedd419db06c1");
    std::string million(1'000'000, 'a');
    CHECK(sha256_hex(million) ==
          "cdc76e5c9914fb9281a1c7e284d73e67f1809a48a497200e046d39ccc7112cd0");
}

TEST_CASE("sha256 handles block-boundary lengths") {
    // 55/56/64 bytes straddle the padding edge cases.
    for (std::size_t n : {55u, 56u, 63u, 64u, 65u, 119u, 120u}) {
        std::string a(n, 'x'), b(n, 'x');
        CHECK(sha256_hex(a) == sha256_hex(b));
        b.back() = 'y';
        CHECK(sha256_hex(a) != sha256_hex(b));
    }
}

TEST_CASE("hmac-sha256 matches RFC 4231 test vectors") {
    std::string key1(20, '\x0b');
    CHECK(hmac_sha256_hex(key1, "Hi There") ==
          "b0344c61d8db38535ca8afceaf0bf12b881dc200c9833da726e9376c2e32cff7");
    CHECK(hmac_sha256_hex("Jefe", "what do ya want for nothing?") ==
          "5bdcc146bf60754e6a042426089575c75a003f089d2739839dec58b964ec3843");
    std::string key3(131, '\xaa');  // key longer than block size
    CHECK(hmac_sha256_hex(key3, "Test Using Larger Than Block-Size Key - Hash Key First") ==
          "60e431591ee0b67f0d8a26aacbf5b77f8e0bc6213728c5140546040f0ee37f54");
}

TEST_CASE("rng streams are deterministic and independent") {
    RngStream a(42, "hris");
    RngStream b(42, "hris");
    RngStream c(42, "alerts");
    for (int i = 0; i < 100; ++i) {
        auto va = a.next_u64();
        CHECK(va == b.next_u64());
    }
    // A different stream name decorrelates even with an equal seed.
    RngStream a2(42, "hris");
    bool any_diff = false;
    for (int i = 0; i < 10; ++i) any_diff |= a2.next_u64() != c.next_u64();
    CHECK(any_diff);
}

TEST_CASE("rng draws stay in range") {
    RngStream rng(7, "ranges");
    for (int i = 0; i < 1000; ++i) {
        double r = rng.next_real();
        CHECK(r >= 0.0);
        CHECK(r < 1.0);
        auto v = rng.uniform_int(5, 9);
        CHECK(v >= 5);
        CHECK(v <= 9);
        CHECK(rng.exponential(100.0) >= 0.0);
    }
    CHECK_FALSE(rng.chance(0.0));
    CHECK(rng.chance(1.0));
}

TEST_CASE("id source yields prefixed unique ids") {
    IdSource ids(123);
    std::set<std::string> seen;
    for (int i = 0; i < 1000; ++i) {
        std::string id = ids.fresh("task");
        CHECK(id.rfind("task-", 0) == 0);
        CHECK(id.size() == 5 + 32);
        seen.insert(id);
    }
    CHECK(seen.size() == 1000);
}

TEST_CASE("hex round trip") {
    std::string bytes = sha256("roundtrip");
    CHECK(from_hex(to_hex(bytes)) == bytes);
    CHECK_THROWS_AS(from_hex("abc"), Error);
    CHECK_THROWS_AS(from_hex("zz"), Error);
}
