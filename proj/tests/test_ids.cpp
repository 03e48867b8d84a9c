#include <doctest.h>

#include "ntx/ids.hpp"

using namespace ntx;

TEST_CASE("tid paths encode the whole superior chain") {
  Tid top = Tid::top_level(SiteId{1}, 1);
  Tid child = top.child(SiteId{2}, 1);
  Tid grand = child.child(SiteId{1}, 2);

  CHECK(top.str() == "s1.t1");
  CHECK(child.str() == "s1.t1/s2.t1");
  CHECK(grand.str() == "s1.t1/s2.t1/s1.t2");
  CHECK(top.depth() == 1);
  CHECK(grand.depth() == 3);
  CHECK(grand.home_site() == SiteId{1});
  CHECK(child.home_site() == SiteId{2});
  CHECK(*grand.parent() == child);
  CHECK(*child.parent() == top);
  CHECK_FALSE(top.parent().has_value());
  CHECK(top.top_level());
  CHECK_FALSE(child.top_level());
}

TEST_CASE("ancestor test is the reflexive prefix relation") {
  Tid a = Tid::top_level(SiteId{1}, 1);
  Tid b = a.child(SiteId{2}, 1);
  Tid c = b.child(SiteId{3}, 1);
  Tid other = Tid::top_level(SiteId{1}, 2);

  CHECK(is_ancestor(a, a));
  CHECK(is_ancestor(a, b));
  CHECK(is_ancestor(a, c));
  CHECK(is_ancestor(b, c));
  CHECK_FALSE(is_ancestor(b, a));
  CHECK_FALSE(is_ancestor(c, a));
  CHECK_FALSE(is_ancestor(other, b));
  CHECK_FALSE(is_ancestor(a, other));

  CHECK(is_superior(a, b));
  CHECK(is_superior(a, c));
  CHECK_FALSE(is_superior(a, a));
  CHECK_FALSE(is_superior(c, b));
}

TEST_CASE("siblings with equal serials at different homes stay distinct") {
  Tid p = Tid::top_level(SiteId{1}, 1);
  Tid c1 = p.child(SiteId{2}, 1);
  Tid c2 = p.child(SiteId{3}, 1);
  CHECK(c1 != c2);
  CHECK_FALSE(is_ancestor(c1, c2));
  CHECK_FALSE(is_ancestor(c2, c1));
}

TEST_CASE("chain sites lists every home from the root down") {
  Tid t = Tid::top_level(SiteId{4}, 1).child(SiteId{2}, 3).child(SiteId{4}, 9);
  auto cs = chain_sites(t);
  REQUIRE(cs.size() == 3);
  CHECK(cs[0] == SiteId{4});
  CHECK(cs[1] == SiteId{2});
  CHECK(cs[2] == SiteId{4});
}

TEST_CASE("tid parse round-trips str") {
  Tid t = Tid::top_level(SiteId{3}, 7).child(SiteId{1}, 2);
  auto back = Tid::parse(t.str());
  REQUIRE(back.has_value());
  CHECK(*back == t);

  CHECK_FALSE(Tid::parse("").has_value());
  CHECK_FALSE(Tid::parse("s1").has_value());
  CHECK_FALSE(Tid::parse("x1.t1").has_value());
  CHECK_FALSE(Tid::parse("s1.t1/").has_value());
}

TEST_CASE("empty tid behaves as no transaction") {
  Tid none;
  CHECK(none.empty());
  CHECK(none.depth() == 0);
  Tid t = Tid::top_level(SiteId{1}, 1);
  CHECK(none < t);
}

TEST_CASE("pid and site render stably") {
  CHECK(SiteId{3}.str() == "s3");
  CHECK(Pid{SiteId{2}, 5}.str() == "s2.p5");
  CHECK_FALSE(Pid{}.valid());
  CHECK(Pid{SiteId{1}, 1}.valid());
}
