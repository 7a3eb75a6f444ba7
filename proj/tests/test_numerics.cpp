#include <gtest/gtest.h>

#include <random>

#include "specdet/numerics.hpp"

using namespace specdet;

namespace {

ComplexMatrix random_matrix(std::mt19937_64& rng, int n) {
  std::normal_distribution<double> nd;
  ComplexMatrix a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = {nd(rng), nd(rng)};
  return a;
}

double rel(cplx a, cplx b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

struct HurwitzRef {
  cplx s;
  double a;
  cplx value;
  cplx derivative;
};

// mpmath zeta(s, a) and zeta(s, a, 1) at 40 significant digits.
const HurwitzRef kHurwitz[] = {
    {{-10.0, 0.0}, 0.05, {-0.003725690508208008, 0.0}, {-0.016089995164442911, 0.0}},
    {{-10.0, 0.0}, 0.25, {-0.012045145034790039, 0.0}, {0.0061990136166892548, 0.0}},
    {{-10.0, 0.0}, 0.5, {0.0, 0.0}, {0.018911440081950784, 0.0}},
    {{-10.0, 0.0}, 1, {0.0, 0.0}, {-0.018929926338140374, 0.0}},
    {{-10.0, 0.0}, 2.5, {-57.666015625, 0.0}, {23.39939583607652, 0.0}},
    {{-10.0, 0.0}, 7, {-71340451.0, 0.0}, {125577227.2464466, 0.0}},
    {{-10.0, 0.0}, 10, {-4914341925.0, 0.0}, {10569280416.7469, 0.0}},
    {{-9.5, 0.0}, 0.05, {-0.0084080658786856004, 0.0}, {-0.002819606378192748, 0.0}},
    {{-9.5, 0.0}, 0.25, {-0.0066628335356947886, 0.0}, {0.013582710635377115, 0.0}},
    {{-9.5, 0.0}, 0.5, {0.0066629575732711787, 0.0}, {0.0073639243113930761, 0.0}},
    {{-9.5, 0.0}, 1, {-0.0066721722964666408, 0.0}, {-0.0073805044488119251, 0.0}},
    {{-9.5, 0.0}, 2.5, {-47.078025343953748, 0.0}, {19.097044898527683, 0.0}},
    {{-9.5, 0.0}, 7, {-29611638.291502825, 0.0}, {52023668.152600308, 0.0}},
    {{-9.5, 0.0}, 10, {-1678263776.4149443, 0.0}, {3602937535.3511761, 0.0}},
    {{-7.3, 0.0}, 0.05, {0.0043630699643498452, 0.0}, {0.00014170537271632365, 0.0}},
    {{-7.3, 0.0}, 0.25, {0.0019863018705258391, 0.0}, {-0.0066113802458542573, 0.0}},
    {{-7.3, 0.0}, 0.5, {-0.0039110638452065339, 0.0}, {-0.0022736342574508296, 0.0}},
    {{-7.3, 0.0}, 1, {0.003936040865716961, 0.0}, {0.0023055775627049534, 0.0}},
    {{-7.3, 0.0}, 2.5, {-19.306207940724104, 0.0}, {7.8171627676610643, 0.0}},
    {{-7.3, 0.0}, 7, {-633832.66787039162, 0.0}, {1100239.5244912023, 0.0}},
    {{-7.3, 0.0}, 10, {-15270046.092774842, 0.0}, {32427301.841270701, 0.0}},
    {{-5.0, 0.0}, 0.05, {-0.0037623711557539682, 0.0}, {0.0014248035653524422, 0.0}},
    {{-5.0, 0.0}, 0.25, {6.0066344246031746e-5, 0.0}, {0.0061679659987102469, 0.0}},
    {{-5.0, 0.0}, 0.5, {0.0038442460317460317, 0.0}, {0.00046912441675989495, 0.0}},
    {{-5.0, 0.0}, 1, {-0.0039682539682539683, 0.0}, {-0.0005729859801986352, 0.0}},
    {{-5.0, 0.0}, 2.5, {-7.621155753968254, 0.0}, {3.0578089397206349, 0.0}},
    {{-5.0, 0.0}, 7, {-12201.003968253968, 0.0}, {20670.923457798976, 0.0}},
    {{-5.0, 0.0}, 10, {-120825.00396825397, 0.0}, {251258.88983786291, 0.0}},
    {{-2.5, 0.0}, 0.05, {0.0048581508001324564, 0.0}, {-0.013484194646433635, 0.0}},
    {{-2.5, 0.0}, 0.25, {-0.0080380960820038435, 0.0}, {-0.016839325116931809, 0.0}},
    {{-2.5, 0.0}, 0.5, {-0.0070113342544251247, 0.0}, {0.0062016988016927905, 0.0}},
    {{-2.5, 0.0}, 1, {0.0085169287778503305, 0.0}, {-0.0062657363721897584, 0.0}},
    {{-2.5, 0.0}, 2.5, {-2.9394639901821374, 0.0}, {1.0009998821564731, 0.0}},
    {{-2.5, 0.0}, 7, {-198.32012476652358, 0.0}, {313.37244344438787, 0.0}},
    {{-2.5, 0.0}, 10, {-751.98127499244468, 0.0}, {1475.9884649047837, 0.0}},
    {{-1.0, 0.0}, 0.05, {-0.059583333333333332, 0.0}, {-0.036019316486209049, 0.0}},
    {{-1.0, 0.0}, 0.25, {0.010416666666666667, 0.0}, {0.093567868970261061, 0.0}},
    {{-1.0, 0.0}, 0.5, {0.041666666666666667, 0.0}, {0.05382943932689441, 0.0}},
    {{-1.0, 0.0}, 1, {-0.083333333333333333, 0.0}, {-0.16542114370045093, 0.0}},
    {{-1.0, 0.0}, 2.5, {-1.9583333333333333, 0.0}, {0.31545351120916833, 0.0}},
    {{-1.0, 0.0}, 7, {-21.083333333333333, 0.0}, {28.859633905442163, 0.0}},
    {{-1.0, 0.0}, 10, {-45.083333333333333, 0.0}, {78.891558478294018, 0.0}},
    {{-0.5, 0.0}, 0.05, {-0.021594443260264739, 0.0}, {0.28519586420887435, 0.0}},
    {{-0.5, 0.0}, 0.25, {0.090322258761246244, 0.0}, {0.23813065574006599, 0.0}},
    {{-0.5, 0.0}, 0.5, {0.06088846558059492, 0.0}, {0.0038007065737381878, 0.0}},
    {{-0.5, 0.0}, 1, {-0.20788622497735457, 0.0}, {-0.36085433959994761, 0.0}},
    {{-0.5, 0.0}, 2.5, {-1.8709631869975417, 0.0}, {0.010262946523175128, 0.0}},
    {{-0.5, 0.0}, 7, {-11.039708315202295, 0.0}, {13.282553847077827, 0.0}},
    {{-0.5, 0.0}, 10, {-19.513886751013075, 0.0}, {30.904170767974757, 0.0}},
    {{0.0, 0.0}, 0.05, {0.45, 0.0}, {2.049940667847058, 0.0}},
    {{0.0, 0.0}, 0.25, {0.25, 0.0}, {0.36908399149340472, 0.0}},
    {{0.0, 0.0}, 0.5, {0.0, 0.0}, {-0.34657359027997265, 0.0}},
    {{0.0, 0.0}, 1, {-0.5, 0.0}, {-0.91893853320467274, 0.0}},
    {{0.0, 0.0}, 2.5, {-2.0, 0.0}, {-0.63425566273175358, 0.0}},
    {{0.0, 0.0}, 7, {-6.5, 0.0}, {5.6603126788054283, 0.0}},
    {{0.0, 0.0}, 10, {-9.5, 0.0}, {11.882888946876797, 0.0}},
    {{0.3, 0.0}, 0.05, {1.4935951212219014, 0.0}, {5.3685595845132547, 0.0}},
    {{0.3, 0.0}, 0.25, {0.33145294278333566, 0.0}, {0.039744079106953305, 0.0}},
    {{0.3, 0.0}, 0.5, {-0.20908381885368533, 0.0}, {-1.2253917359239642, 0.0}},
    {{0.3, 0.0}, 1, {-0.90455925725398397, 0.0}, {-1.9618608600898818, 0.0}},
    {{0.3, 0.0}, 2.5, {-2.3256957254941577, 0.0}, {-1.7197298420007728, 0.0}},
    {{0.3, 0.0}, 7, {-5.2970132461094062, 0.0}, {2.3457169916022406, 0.0}},
    {{0.3, 0.0}, 10, {-6.9079716606525854, 0.0}, {5.6820554160793729, 0.0}},
    {{0.5, 0.0}, 0.05, {2.9476874207806957, 0.0}, {9.4452288295618725, 0.0}},
    {{0.5, 0.0}, 0.25, {0.23996352449563096, 0.0}, {-1.2501538245865748, 0.0}},
    {{0.5, 0.0}, 0.5, {-0.60489864342163037, 0.0}, {-3.0563376308624982, 0.0}},
    {{0.5, 0.0}, 1, {-1.4603545088095868, 0.0}, {-3.9226461392091517, 0.0}},
    {{0.5, 0.0}, 2.5, {-2.8356087867224515, 0.0}, {-3.7055348998752383, 0.0}},
    {{0.5, 0.0}, 7, {-5.1002734451495811, 0.0}, {-0.65384053052897633, 0.0}},
    {{0.5, 0.0}, 10, {-6.1651246420854154, 0.0}, {1.5492461735288388, 0.0}},
    {{2.0, 0.0}, 0.05, {401.53235734211507, 0.0}, {1197.3208090822159, 0.0}},
    {{2.0, 0.0}, 0.25, {17.197329154507111, 0.0}, {21.148279617539289, 0.0}},
    {{2.0, 0.0}, 0.5, {4.9348022005446793, 0.0}, {1.7480808796238798, 0.0}},
    {{2.0, 0.0}, 1, {1.6449340668482264, 0.0}, {-0.93754825431584375, 0.0}},
    {{2.0, 0.0}, 2.5, {0.49035775610023486, 0.0}, {-0.84430112790116174, 0.0}},
    {{2.0, 0.0}, 7, {0.15354517795933755, 0.0}, {-0.44140141666681987, 0.0}},
    {{2.0, 0.0}, 10, {0.10516633568168575, 0.0}, {-0.34207146120670555, 0.0}},
    {{3.7, 0.0}, 0.05, {65135.417983047221, 0.0}, {195125.35038510093, 0.0}},
    {{3.7, 0.0}, 0.25, {169.40764935990439, 0.0}, {233.97049292046683, 0.0}},
    {{3.7, 0.0}, 0.5, {13.271076161581905, 0.0}, {8.8595190095602233, 0.0}},
    {{3.7, 0.0}, 1, {1.1062882414646792, 0.0}, {-0.09220632335339039, 0.0}},
    {{3.7, 0.0}, 2.5, {0.051956943742509778, 0.0}, {-0.058196813877101935, 0.0}},
    {{3.7, 0.0}, 7, {0.0023417887623154665, 0.0}, {-0.0052651932570579598, 0.0}},
    {{3.7, 0.0}, 10, {0.00084487407869877291, 0.0}, {-0.0022174480539540571, 0.0}},
    {{7.0, 0.0}, 0.05, {1280000000.7177338, 0.0}, {3834537310.1091527, 0.0}},
    {{7.0, 0.0}, 0.25, {16384.213455199572, 0.0}, {22712.996849089223, 0.0}},
    {{7.0, 0.0}, 0.5, {128.0603582275042, 0.0}, {88.697354051496863, 0.0}},
    {{7.0, 0.0}, 1, {1.0083492773819228, 0.0}, {-0.0060335169608756378, 0.0}},
    {{7.0, 0.0}, 2.5, {0.0018305640382639378, 0.0}, {-0.0017541347816030475, 0.0}},
    {{7.0, 0.0}, 7, {2.122609760618335e-6, 0.0}, {-4.3529300233382754e-6, 0.0}},
    {{7.0, 0.0}, 10, {2.2243176538442862e-7, 0.0}, {-5.3913804377818348e-7, 0.0}},
    {{10.0, 0.0}, 0.05, {10240000000000.609, 0.0}, {30676298481192.82, 0.0}},
    {{10.0, 0.0}, 0.25, {1048576.1076831148, 0.0}, {1453634.9717920749, 0.0}},
    {{10.0, 0.0}, 0.5, {1024.0174503557579, 0.0}, {709.77558035842367, 0.0}},
    {{10.0, 0.0}, 1, {1.0009945751278181, 0.0}, {-0.00069703300817139369, 0.0}},
    {{10.0, 0.0}, 2.5, {0.00010882584206868631, 0.0}, {-0.00010114965824695509, 0.0}},
    {{10.0, 0.0}, 7, {4.9275215608802331e-9, 0.0}, {-9.8568846694502009e-9, 0.0}},
    {{10.0, 0.0}, 10, {1.6926861254407483e-10, 0.0}, {-4.0131489102027705e-10, 0.0}},
    {{0.5, 3.0}, 0.05, {-3.5611762961168408, 1.7187290600351939}, {-11.982334709207852, 5.5904481819368421}},
    {{0.5, 3.0}, 0.25, {-0.82131599561179788, -2.1179135469010689}, {-1.4037224675002729, -2.4221526579180759}},
    {{0.5, 3.0}, 0.5, {-0.80218843458193717, 0.79126003575949372}, {-0.42026146683131157, 0.85413632961079736}},
    {{0.5, 3.0}, 1, {0.53273667097423288, -0.078896513425833383}, {0.19175988409272137, -0.073135728865928932}},
    {{0.5, 3.0}, 2.5, {-0.39682203417113187, 0.3218337378517925}, {0.1720063871827901, -0.31251305395627834}},
    {{0.5, 3.0}, 7, {0.40746426032986383, -0.74134990631258414}, {-0.50464898184785833, 1.4773804388257748}},
    {{0.5, 3.0}, 10, {-0.60441202162172993, -0.81885192505199519}, {1.591351250631919, 1.6048749954602746}},
    {{-2.0, 1.5}, 0.05, {0.056431953693131313, -0.028559987044777809}, {0.023873084378419727, -0.079022164150846102}},
    {{-2.0, 1.5}, 0.25, {-0.022212196015550675, -0.057643790366694737}, {-0.080551957865053925, -0.023197898686072282}},
    {{-2.0, 1.5}, 0.5, {-0.04864810837168267, 0.018486137853209605}, {-0.014650340105815283, 0.067740729050881871}},
    {{-2.0, 1.5}, 1, {0.057426474332007845, -0.0069922896983904338}, {0.03829978755427201, -0.058986237586304606}},
    {{-2.0, 1.5}, 2.5, {-2.0217915399336723, 1.0885462348766126}, {0.64628939249521038, -0.60295444248774008}},
    {{-2.0, 1.5}, 7, {56.54288917168582, 58.800496824339123}, {-98.143138815065571, -86.721846998037548}},
    {{-2.0, 1.5}, 10, {248.3547841974861, 58.615253182510377}, {-500.05050664982209, -83.425621301588141}},
    {{4.0, -6.0}, 0.05, {102540.33981201664, 122823.79402000027}, {307181.05964502836, 367946.64713196023}},
    {{4.0, -6.0}, 0.25, {-114.41451088395761, -228.59047521530728}, {-158.78480767987012, -317.46872488831728}},
    {{4.0, -6.0}, 0.5, {-8.542857412702512, 13.727481344542945}, {-5.7848733768127856, 9.3916498593950028}},
    {{4.0, -6.0}, 1, {0.97596206035202757, -0.047145226018555003}, {0.014040198116855802, 0.029959041585601451}},
    {{4.0, -6.0}, 2.5, {0.017862586944082158, -0.012085174008980856}, {-0.015775774383348417, 0.0093651460251397284}},
    {{4.0, -6.0}, 7, {0.00054549715204939945, -0.0001030936970992537}, {-0.0010739785075139415, 0.00013410210665730237}},
    {{4.0, -6.0}, 10, {-8.3827812034283132e-5, 0.00015448143074539004}, {0.00021434281252408151, -0.00034787519251980095}},
    {{0.0, 2.0}, 0.05, {1.2338894979505485, -0.57551707468052096}, {3.0486141837203144, -1.0499099541826927}},
    {{0.0, 2.0}, 0.25, {-0.85771868845139747, -0.080162666990532437}, {-1.2003166170533463, 0.31457882782813137}},
    {{0.0, 2.0}, 0.5, {-0.029239605886666824, 0.49856055795666682}, {0.20002240755027687, 0.53605020954595733}},
    {{0.0, 2.0}, 1, {0.31472576404209958, -0.23167964875052068}, {0.2102509993075598, -0.17681847808391591}},
    {{0.0, 2.0}, 2.5, {-0.90152097169176569, 0.24046106108290888}, {0.35215397894231231, -0.43926580576889845}},
    {{0.0, 2.0}, 7, {2.5511554466329146, 1.4172735634516731}, {-4.8238902438265501, -1.357673205690178}},
    {{0.0, 2.0}, 10, {4.1209723029987927, -1.0651000079010025}, {-8.0273701075165532, 3.8251150308406963}},
    {{-6.0, -4.0}, 0.05, {-0.19416295131084171, 0.24201112625238891}, {-0.20733859795060178, -0.24567446353234584}},
    {{-6.0, -4.0}, 0.25, {-0.29327623390626133, -0.11000581885619743}, {0.16805177267874744, -0.27625879187011535}},
    {{-6.0, -4.0}, 0.5, {0.11366278362260162, -0.29323873660932727}, {0.27813260511890749, 0.17189285397055255}},
    {{-6.0, -4.0}, 1, {-0.11042125612142322, 0.28964004811863392}, {-0.27286930104081225, -0.17036666406728733}},
    {{-6.0, -4.0}, 2.5, {0.70963534997669639, -11.663380463766459}, {0.052496859761613741, 4.7882800785913594}},
    {{-6.0, -4.0}, 7, {-47770.680257451912, -35053.823851911411}, {81771.369531976719, 63941.816712067693}},
    {{-6.0, -4.0}, 10, {488797.69534536787, -702479.64214003015}, {-1085455.9038184638, 1473317.9064587483}},
    {{2.0, 9.0}, 0.05, {-101.07548999127986, 386.373494099846}, {-305.95936523789032, 1158.6188120600197}},
    {{2.0, 9.0}, 0.25, {15.756112261206203, -2.1223107144971963}, {22.079939613697325, -1.7850297992214902}},
    {{2.0, 9.0}, 0.5, {3.5726389376822227, -0.066265168294969888}, {2.9519442160747087, -0.12712423347094479}},
    {{2.0, 9.0}, 1, {1.189539134633473, 0.049105001387273515}, {-0.11376091031718407, -0.045272875013643721}},
    {{2.0, 9.0}, 2.5, {-0.034929279808890627, -0.10291614022330334}, {0.024659229466603836, 0.084808327450360305}},
    {{2.0, 9.0}, 7, {0.015988141376522425, 0.0090267437679715244}, {-0.031013206663262451, -0.015573353091878379}},
    {{2.0, 9.0}, 10, {-0.011661656670712316, -0.0030567155413219359}, {0.026724504828276946, 0.0057412148336386512}},
};

}  // namespace

TEST(Det, Identity) { EXPECT_NEAR(std::abs(det(ComplexMatrix::Identity(3, 3)) - 1.0), 0.0, 1e-15); }

TEST(Det, Diagonal) { EXPECT_NEAR(std::abs(det(make_matrix(2, 2, {2, 0, 0, 3})) - 6.0), 0.0, 1e-14); }

TEST(Det, Permutation) { EXPECT_NEAR(std::abs(det(make_matrix(2, 2, {0, 1, 1, 0})) + 1.0), 0.0, 1e-15); }

TEST(Det, RejectsNonSquare) {
  try {
    det(ComplexMatrix::Zero(2, 3));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NonSquare);
  }
}

TEST(Det, RejectsNonFinite) {
  ComplexMatrix m = ComplexMatrix::Identity(2, 2);
  m(0, 1) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(det(m), Error);
}

TEST(Det, Multiplicative) {
  std::mt19937_64 rng(101);
  for (int t = 0; t < 20; ++t) {
    ComplexMatrix a = random_matrix(rng, 8) + 4.0 * ComplexMatrix::Identity(8, 8);
    ComplexMatrix b = random_matrix(rng, 8) + 4.0 * ComplexMatrix::Identity(8, 8);
    cplx lhs = det(a * b), rhs = det(a) * det(b);
    EXPECT_LT(std::abs(lhs - rhs) / std::abs(rhs), 1e-10);
  }
}

TEST(MatrixExp, Zero) { EXPECT_LT((matrix_exp(ComplexMatrix::Zero(3, 3)) - ComplexMatrix::Identity(3, 3)).norm(), 1e-15); }

TEST(MatrixExp, Diagonal) {
  ComplexMatrix e = matrix_exp(make_matrix(2, 2, {cplx(1.5, 0.5), 0, 0, -2.0}));
  EXPECT_LT(rel(e(0, 0), std::exp(cplx(1.5, 0.5))), 1e-14);
  EXPECT_LT(rel(e(1, 1), std::exp(-2.0)), 1e-14);
  EXPECT_EQ(e(0, 1), cplx(0.0));
}

TEST(MatrixExp, Nilpotent) {
  ComplexMatrix e = matrix_exp(make_matrix(2, 2, {0, 3.5, 0, 0}));
  EXPECT_LT((e - make_matrix(2, 2, {1, 3.5, 0, 1})).norm(), 1e-14);
}

TEST(MatrixExp, HarmonicOscillator) {
  // exp of [[0, 1], [-mu^2, 0]] is the rotation with sin(mu)/mu and -mu sin(mu) off the diagonal.
  const double mu = 7.3;
  ComplexMatrix e = matrix_exp(make_matrix(2, 2, {0, 1, -mu * mu, 0}));
  EXPECT_LT(std::abs(e(0, 0) - std::cos(mu)), 1e-12);
  EXPECT_LT(std::abs(e(0, 1) - std::sin(mu) / mu), 1e-12);
  EXPECT_LT(std::abs(e(1, 0) + mu * std::sin(mu)), 1e-11);
}

TEST(MatrixExp, InverseProperty) {
  std::mt19937_64 rng(7);
  for (int t = 0; t < 20; ++t) {
    ComplexMatrix m = random_matrix(rng, 6);
    m *= 3.0 / m.norm();
    ComplexMatrix p = matrix_exp(m) * matrix_exp(-m);
    EXPECT_LT((p - ComplexMatrix::Identity(6, 6)).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(MatrixExp, AccurateAtNormFifty) {
  // A similarity transform of a diagonal matrix with known exponential.
  std::mt19937_64 rng(13);
  ComplexMatrix s = random_matrix(rng, 4) + 3.0 * ComplexMatrix::Identity(4, 4);
  ComplexMatrix d = ComplexMatrix::Zero(4, 4);
  cplx ev[4] = {cplx(10, 20), cplx(-12, 3), cplx(5, -15), cplx(-1, 0)};
  for (int i = 0; i < 4; ++i) d(i, i) = ev[i];
  ComplexMatrix sinv = s.inverse();
  ComplexMatrix m = s * d * sinv;
  m *= 1.0;
  ComplexMatrix ed = ComplexMatrix::Zero(4, 4);
  for (int i = 0; i < 4; ++i) ed(i, i) = std::exp(ev[i]);
  ComplexMatrix expected = s * ed * sinv;
  EXPECT_LT((matrix_exp(m) - expected).norm() / expected.norm(), 1e-12);
}

TEST(ScaledExp, MatchesPlainExponential) {
  ComplexMatrix m = make_matrix(2, 2, {0, 1, 400, 0});
  ScaledMatrix s = scaled_exp(m);
  ComplexMatrix plain = matrix_exp(m);
  ComplexMatrix back = s.mantissa * std::exp(s.log_scale);
  EXPECT_LT((back - plain).norm() / plain.norm(), 1e-12);
}

TEST(ScaledExp, RepresentsOverflow) {
  ScaledMatrix s = scaled_exp(make_matrix(1, 1, {2000.0}));
  EXPECT_NEAR((std::log(s.mantissa(0, 0)) + s.log_scale).real(), 2000.0, 1e-9);
}

TEST(SpectralCut, BranchInterval) {
  SpectralCut cut(0.5 * pi);
  EXPECT_NEAR(cut.arg(cplx(-1, 0)), -pi, 1e-15);
  EXPECT_NEAR(cut.arg(cplx(1, 0)), 0.0, 1e-15);
  EXPECT_NEAR(cut.arg(cplx(0, -1)), -0.5 * pi, 1e-15);
  SpectralCut cut2(1.5 * pi);
  EXPECT_NEAR(cut2.arg(cplx(-1, 0)), pi, 1e-15);
  EXPECT_NEAR(cut2.arg(cplx(0, -1)), -0.5 * pi, 1e-15);
  EXPECT_NEAR(cut2.arg(cplx(0, 1)), 0.5 * pi, 1e-15);
}

TEST(SpectralCut, LogIsInverseOfExp) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-5, 5);
  for (double theta : {0.3, pi, 4.0}) {
    SpectralCut cut(theta);
    for (int t = 0; t < 100; ++t) {
      cplx z(u(rng), u(rng));
      double a = cut.arg(z);
      EXPECT_GE(a, theta - two_pi - 1e-14);
      EXPECT_LT(a, theta);
      EXPECT_LT(std::abs(std::exp(cut.log(z)) - z), 1e-13 * std::abs(z));
    }
  }
}

TEST(Hurwitz, BaselValue) { EXPECT_NEAR(std::abs(hurwitz_zeta(2.0, 1.0) - pi * pi / 6.0), 0.0, 1e-13); }

TEST(Hurwitz, ValueAtZero) {
  for (double a : {0.05, 0.3, 1.0, 2.5, 7.0, 10.0}) EXPECT_NEAR(std::abs(hurwitz_zeta(0.0, a) - (0.5 - a)), 0.0, 1e-13);
}

TEST(Hurwitz, DerivativeAtZeroRiemann) {
  EXPECT_NEAR(std::abs(hurwitz_zeta_ds(0.0, 1.0) + 0.5 * std::log(two_pi)), 0.0, 1e-13);
}

TEST(Hurwitz, PoleAtOne) {
  try {
    hurwitz_zeta(1.0, 0.5);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::PoleAtOne);
  }
}

TEST(Hurwitz, ReferenceTable) {
  for (const auto& r : kHurwitz) {
    EXPECT_LT(rel(hurwitz_zeta(r.s, r.a), r.value), 1e-12) << "s=" << r.s << " a=" << r.a;
    EXPECT_LT(rel(hurwitz_zeta_ds(r.s, r.a), r.derivative), 1e-12) << "s=" << r.s << " a=" << r.a;
  }
}

TEST(Hurwitz, ShiftRecurrence) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> us(-10, 10), ua(0.05, 9.0);
  for (int t = 0; t < 200; ++t) {
    cplx s(us(rng), 0.5 * us(rng));
    if (std::abs(s - 1.0) < 0.1) continue;
    double a = ua(rng);
    cplx z0 = hurwitz_zeta(s, a), z1 = hurwitz_zeta(s, a + 1.0);
    cplx rhs = std::exp(-s * std::log(a));
    // Each term carries its own 1e-12 mixed error; the difference cancels.
    double scale = std::max({1.0, std::abs(z0), std::abs(z1)});
    EXPECT_LT(std::abs(z0 - z1 - rhs), 2e-12 * scale) << "s=" << s << " a=" << a;
  }
}

TEST(Digamma, AtOneIsMinusEulerGamma) { EXPECT_NEAR(digamma(1.0), -euler_gamma, 1e-12); }

TEST(Digamma, Recurrence) {
  for (double x : {0.1, 0.7, 2.3, 15.0}) EXPECT_NEAR(digamma(x + 1.0) - digamma(x), 1.0 / x, 1e-12);
}

TEST(ExpInt, KnownValues) {
  EXPECT_NEAR(expint_e1(1.0), 0.21938393439552027, 1e-15);
  EXPECT_NEAR(expint_e1(1e-3), 6.3315393641361493, 1e-12);
}

TEST(Eigen, HermitianEigenvaluesSorted) {
  auto ev = hermitian_eigenvalues(make_matrix(2, 2, {2, cplx(0, 1), cplx(0, -1), 2}));
  ASSERT_EQ(ev.size(), 2u);
  EXPECT_NEAR(ev[0], 1.0, 1e-14);
  EXPECT_NEAR(ev[1], 3.0, 1e-14);
}
