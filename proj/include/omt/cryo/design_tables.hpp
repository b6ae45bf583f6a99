#pragma once

#include <cstddef>

// Spherical t-design point tables used by the rotation quadrature builder.
// Generated by tools/gen_design.py; uniform-weight averages of all
// spherical harmonics of degree 1..t vanish to ~1e-12 on these sets.

namespace omt::design_tables {

// 36-point spherical 7-design (antipodally symmetric)
inline constexpr int design36_degree = 7;
inline constexpr std::size_t design36_count = 36;
inline constexpr double design36[36][3] = {
    {+7.46535462328576371e-02, -2.14868309259724777e-01, +9.73785632318903027e-01},
    {-2.88196534942071092e-01, +2.37899461818849384e-01, +9.27548706706923021e-01},
    {+5.12994382021293216e-01, +1.48448363461766986e-01, +8.45458365267098499e-01},
    {-2.80268884128583418e-01, -5.34153202591050480e-01, +7.97577399849721758e-01},
    {-1.14401677488902731e-01, +6.45781550630735723e-01, +7.54902937504344118e-01},
    {+6.13364171873352904e-01, -4.07888117184733001e-01, +6.76322169177981047e-01},
    {-7.49905891811791014e-01, -2.29131095197241327e-02, +6.61147595350765394e-01},
    {+4.98885746218784898e-01, +5.89397010770258412e-01, +6.35392930331153405e-01},
    {-4.68847173075583740e-02, -8.71019796557276571e-01, +4.89005457319558912e-01},
    {-7.01098716409499612e-01, +5.70509152409328868e-01, +4.27761495305668316e-01},
    {+9.52865336682438890e-01, -1.57223295234401005e-02, +3.02985904793306893e-01},
    {-8.23220019826616189e-01, -3.88967560798133105e-01, +4.13537223963473588e-01},
    {+1.43400339113984449e-01, +9.50462442986078293e-01, +2.75785219355443534e-01},
    {+5.17127786117206778e-01, -7.65467639193005867e-01, +3.82933605438074087e-01},
    {-9.43230734538267557e-01, +3.27623236233140380e-01, +5.45783519586667959e-02},
    {+8.53744505673004195e-01, +4.94578681760075189e-01, +1.62825816692636433e-01},
    {-4.87985844265051705e-01, -8.61928891894578331e-01, +1.37653191442512757e-01},
    {-3.80849721595471979e-01, +9.15791107683353256e-01, +1.27593638747189986e-01},
    {-7.46535462328578175e-02, +2.14868309259724749e-01, -9.73785632318903027e-01},
    {+2.88196534942071314e-01, -2.37899461818849633e-01, -9.27548706706922799e-01},
    {-5.12994382021293327e-01, -1.48448363461766958e-01, -8.45458365267098499e-01},
    {+2.80268884128585416e-01, +5.34153202591049481e-01, -7.97577399849721758e-01},
    {+1.14401677488900330e-01, -6.45781550630735945e-01, -7.54902937504344229e-01},
    {-6.13364171873354347e-01, +4.07888117184730892e-01, -6.76322169177981047e-01},
    {+7.49905891811791125e-01, +2.29131095197267105e-02, -6.61147595350765283e-01},
    {-4.98885746218783011e-01, -5.89397010770260299e-01, -6.35392930331153183e-01},
    {+4.68847173075553902e-02, +8.71019796557276682e-01, -4.89005457319558801e-01},
    {+7.01098716409501721e-01, -5.70509152409326536e-01, -4.27761495305668205e-01},
    {-9.52865336682438890e-01, +1.57223295234368322e-02, -3.02985904793306782e-01},
    {+8.23220019826614968e-01, +3.88967560798135936e-01, -4.13537223963473477e-01},
    {-1.43400339113981201e-01, -9.50462442986078848e-01, -2.75785219355443423e-01},
    {-5.17127786117198562e-01, +7.65467639193011418e-01, -3.82933605438073976e-01},
    {+9.43230734538264004e-01, -3.27623236233150539e-01, -5.45783519586666710e-02},
    {-8.53744505673009635e-01, -4.94578681760065975e-01, -1.62825816692636322e-01},
    {+4.87985844265060975e-01, +8.61928891894573002e-01, -1.37653191442512646e-01},
    {+3.80849721595462154e-01, -9.15791107683357253e-01, -1.27593638747189875e-01},
};

// 100-point spherical 13-design (antipodally symmetric)
inline constexpr int design100_degree = 13;
inline constexpr std::size_t design100_count = 100;
inline constexpr double design100[100][3] = {
    {+6.40231959083444324e-02, -1.86623336291512232e-01, +9.80343185184202159e-01},
    {-1.99180341047275861e-01, +9.28333044306203364e-02, +9.75555825839189317e-01},
    {+2.63143651599353989e-01, +7.74405861264855361e-02, +9.61643579629866907e-01},
    {-2.66767986407589697e-01, -2.96959272022965126e-01, +9.16869692043329909e-01},
    {-3.43155706632780125e-02, +3.67150152444554179e-01, +9.29528486475801441e-01},
    {+4.23908460145590582e-01, -2.72914316378967958e-01, +8.63608356451230019e-01},
    {-5.14353674991983367e-01, -5.77337712657608609e-02, +8.55632578083416528e-01},
    {+3.14470752454307778e-01, +4.00051148050114935e-01, +8.60852615024550238e-01},
    {+7.96224351298712024e-02, -5.29974660525966645e-01, +8.44267213045950204e-01},
    {-3.86668587395140650e-01, +4.04595617890209314e-01, +8.28727813884562625e-01},
    {+6.04743065137847924e-01, +4.13827712725512373e-02, +7.95344762608948264e-01},
    {-5.14989008548382032e-01, -4.86987141880940277e-01, +7.05428837457746316e-01},
    {+4.64905949824704137e-02, +6.91403027368735490e-01, +7.20971898428450220e-01},
    {+3.78309734922620711e-01, -5.97633648236906678e-01, +7.06905769503843873e-01},
    {-6.58526212441747805e-01, +1.99025690351536833e-01, +7.25763048182545778e-01},
    {+6.36234621190531757e-01, +3.54001266480854504e-01, +6.85484215812801612e-01},
    {-2.05699969471835969e-01, -6.50004744150791680e-01, +7.31560903234139248e-01},
    {-2.57285652597573966e-01, +6.97767709275218695e-01, +6.68523983758439577e-01},
    {+6.91892445574653125e-01, -3.32064993899893246e-01, +6.41106608594069538e-01},
    {-7.34229278836325383e-01, -2.72057136199080563e-01, +6.22006656509915934e-01},
    {+3.73181281516866303e-01, +6.79864374078044786e-01, +6.31284534884942183e-01},
    {+1.22238242268418881e-01, -8.35039033200904779e-01, +5.36439768434467945e-01},
    {-6.14063891255962613e-01, +5.52082704222412901e-01, +5.64030340632534766e-01},
    {+8.46696775112928068e-01, +9.39376500406566804e-03, +5.31992789605663874e-01},
    {-5.44281219760353707e-01, -7.27022281796953163e-01, +4.18564876198341707e-01},
    {-1.65298983368146746e-01, +9.17164378637507660e-01, +3.62609636738920271e-01},
    {+7.27430233469881560e-01, -5.44406574837897783e-01, +4.17692155429356615e-01},
    {-8.71944120977532267e-01, +9.68965103710483881e-03, +4.89509510178809171e-01},
    {+6.93013784012882716e-01, +5.73669110640643853e-01, +4.36618422269283268e-01},
    {-2.17875545492742767e-01, -8.66198320774275055e-01, +4.49700695756706625e-01},
    {-4.94571711665472480e-01, +7.96650794365785231e-01, +3.47485731874918824e-01},
    {+9.36814885277145626e-01, -1.88280898987110951e-01, +2.94835842121974501e-01},
    {-7.77425076654116531e-01, -5.42455212381875884e-01, +3.18359219670288573e-01},
    {+1.56412935921578899e-01, +9.08965435571943314e-01, +3.86415359958554583e-01},
    {+4.57538468651396302e-01, -7.88628488836044528e-01, +4.10759852347222398e-01},
    {-8.48359431382829654e-01, +3.58731375031325572e-01, +3.89355975621200057e-01},
    {+8.94013789381512325e-01, +2.93168004468521926e-01, +3.38809482676700691e-01},
    {-3.83774698117581026e-01, -9.14982497188674526e-01, +1.24595388851822697e-01},
    {-3.12556897536408917e-01, +9.49367996380808821e-01, +3.17583571726138547e-02},
    {+8.73724973996277243e-01, -4.75077320178445450e-01, +1.04432799767465584e-01},
    {-9.36153769644339717e-01, -2.44438087158715234e-01, +2.52717512505328756e-01},
    {+4.81551164837682066e-01, +8.26612113464420872e-01, +2.91240260811164553e-01},
    {+1.03077916381191168e-01, -9.70434407932998400e-01, +2.18247572848458055e-01},
    {-7.50430623158643950e-01, +6.41614155813552078e-01, +1.58698314059703444e-01},
    {+9.94648480539546909e-01, +9.21724109137940645e-02, +4.66759769764836518e-02},
    {-6.61742330458084949e-01, -7.49547823404524305e-01, -1.65876010755792308e-02},
    {+1.25410337138508243e-01, +9.91227970128946478e-01, +4.17056180011049701e-02},
    {+5.85344096864441110e-01, -8.03518038914142085e-01, +1.08309969095752717e-01},
    {-9.72221800757312793e-01, +1.95517607159399337e-01, +1.28676475794415490e-01},
    {+8.67063579251444838e-01, +4.94596376703484386e-01, +5.97927561453612880e-02},
    {-6.40231959083446545e-02, +1.86623336291512426e-01, -9.80343185184202159e-01},
    {+1.99180341047275916e-01, -9.28333044306203919e-02, -9.75555825839189317e-01},
    {-2.63143651599353934e-01, -7.74405861264854806e-02, -9.61643579629866907e-01},
    {+2.66767986407588809e-01, +2.96959272022966236e-01, -9.16869692043329798e-01},
    {+3.43155706632792754e-02, -3.67150152444554068e-01, -9.29528486475801441e-01},
    {-4.23908460145591803e-01, +2.72914316378966681e-01, -8.63608356451229797e-01},
    {+5.14353674991983478e-01, +5.77337712657626581e-02, -8.55632578083416417e-01},
    {-3.14470752454306446e-01, -4.00051148050116046e-01, -8.60852615024550238e-01},
    {-7.96224351298730204e-02, +5.29974660525966312e-01, -8.44267213045950204e-01},
    {+3.86668587395141927e-01, -4.04595617890207926e-01, -8.28727813884562625e-01},
    {-6.04743065137848035e-01, -4.13827712725533328e-02, -7.95344762608948153e-01},
    {+5.14989008548380478e-01, +4.86987141880942165e-01, -7.05428837457746094e-01},
    {-4.64905949824778800e-02, -6.91403027368735268e-01, -7.20971898428449998e-01},
    {-3.78309734922614327e-01, +5.97633648236910897e-01, -7.06905769503843873e-01},
    {+6.58526212441745695e-01, -1.99025690351543910e-01, -7.25763048182545778e-01},
    {-6.36234621190535643e-01, -3.54001266480847676e-01, -6.85484215812801501e-01},
    {+2.05699969471842964e-01, +6.50004744150789460e-01, -7.31560903234139248e-01},
    {+2.57285652597566472e-01, -6.97767709275221581e-01, -6.68523983758439466e-01},
    {-6.91892445574649462e-01, +3.32064993899900684e-01, -6.41106608594069649e-01},
    {+7.34229278836328270e-01, +2.72057136199072624e-01, -6.22006656509915934e-01},
    {-3.73181281516873686e-01, -6.79864374078040901e-01, -6.31284534884941961e-01},
    {-1.22238242268409902e-01, +8.35039033200906111e-01, -5.36439768434467945e-01},
    {+6.14063891255956729e-01, -5.52082704222419562e-01, -5.64030340632534655e-01},
    {-8.46696775112928068e-01, -9.39376500405653819e-03, -5.31992789605663985e-01},
    {+5.44281219760361590e-01, +7.27022281796947278e-01, -4.18564876198341762e-01},
    {+1.65298983368136865e-01, -9.17164378637509436e-01, -3.62609636738920160e-01},
    {-7.27430233469875787e-01, +5.44406574837905666e-01, -4.17692155429356726e-01},
    {+8.71944120977532156e-01, -9.68965103711423928e-03, -4.89509510178809060e-01},
    {-6.93013784012889045e-01, -5.73669110640636415e-01, -4.36618422269283157e-01},
    {+2.17875545492752093e-01, +8.66198320774272501e-01, -4.49700695756706681e-01},
    {+4.94571711665463931e-01, -7.96650794365790782e-01, -3.47485731874918713e-01},
    {-9.36814885277143627e-01, +1.88280898987121081e-01, -2.94835842121974390e-01},
    {+7.77425076654122305e-01, +5.42455212381867558e-01, -3.18359219670288462e-01},
    {-1.56412935921588725e-01, -9.08965435571941760e-01, -3.86415359958554472e-01},
    {-4.57538468651387809e-01, +7.88628488836049635e-01, -4.10759852347222287e-01},
    {+8.48359431382825768e-01, -3.58731375031334732e-01, -3.89355975621199946e-01},
    {-8.94013789381515545e-01, -2.93168004468512322e-01, -3.38809482676700580e-01},
    {+3.83774698117590851e-01, +9.14982497188670307e-01, -1.24595388851822586e-01},
    {+3.12556897536398648e-01, -9.49367996380812151e-01, -3.17583571726137298e-02},
    {-8.73724973996272136e-01, +4.75077320178454887e-01, -1.04432799767465473e-01},
    {+9.36153769644342382e-01, +2.44438087158705131e-01, -2.52717512505328645e-01},
    {-4.81551164837690948e-01, -8.26612113464415654e-01, -2.91240260811164442e-01},
    {-1.03077916381180718e-01, +9.70434407932999510e-01, -2.18247572848457916e-01},
    {+7.50430623158637067e-01, -6.41614155813560294e-01, -1.58698314059703305e-01},
    {-9.94648480539547908e-01, -9.21724109137833508e-02, -4.66759769764835269e-02},
    {+6.61742330458092942e-01, +7.49547823404517199e-01, +1.65876010755793522e-02},
    {-1.25410337138518901e-01, -9.91227970128945146e-01, -4.17056180011048452e-02},
    {-5.85344096864432339e-01, +8.03518038914148414e-01, -1.08309969095752592e-01},
    {+9.72221800757310683e-01, -1.95517607159409801e-01, -1.28676475794415379e-01},
    {-8.67063579251450167e-01, -4.94596376703475060e-01, -5.97927561453611631e-02},
};

} // namespace omt::design_tables
