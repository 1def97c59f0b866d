//! Update-law fixtures shared by the unit tests and the acceptance suite.
//!
//! Expected values were evaluated independently in double precision.

use nalgebra::{DMatrix, DVector};
use staf_core::adp::{AdpGains, BePoint};

pub struct Fixture {
    /// eta_c1, eta_c2, eta_a1, eta_a2, beta, nu
    pub gains: [f64; 6],
    pub gamma: &'static [f64],
    pub w_actor: &'static [f64],
    pub w_critic: &'static [f64],
    /// (ω, δ, Gσ); the first is the on-trajectory point, the rest extrapolated.
    pub points: &'static [(&'static [f64], f64, &'static [f64])],
    pub critic: &'static [f64],
    pub gamma_dot: &'static [f64],
    pub actor: &'static [f64],
}

pub const FIXTURES: &[Fixture] = &[
    Fixture {
        gains: [0.19045125630674023, 2.999626852914505, 1.9666522470545602, 0.08367495168044031, 0.02730550692629823, 0.12135642522665893],
        gamma: &[3.7115502214244334, 0.7708254401783948, -0.6610477918447715, 0.7708254401783948, 6.843054417937422, -0.9416570671236012, -0.6610477918447715, -0.9416570671236012, 3.8983825319316994],
        w_actor: &[-0.9278626907702291, -0.9331679527718499, -1.4700371639889616],
        w_critic: &[-0.7876892940867893, 0.3194143920162998, 0.8572703661247674],
        points: &[
            (&[1.0319313479409793, 0.15695141250483097, -3.912355549887426], -0.8156895315256701, &[0.05742200247778534, -0.0485472128548355, 0.205126663591298, -0.0485472128548355, 0.04104405583703712, -0.17342355490687608, 0.205126663591298, -0.17342355490687608, 0.732766993494797]),
            (&[0.9376640505674977, 6.339191142725345, -1.8904891876174197], 0.22516072407457527, &[2.878301650738575, -3.3287340562423666, 1.4832279989666184, -3.3287340562423666, 3.8496557212286975, -1.7153419455064731, 1.4832279989666184, -1.7153419455064731, 0.7643275666933679]),
        ],
        critic: &[-1.9765320388898178, -11.734079214653239, 2.276860555115184],
        gamma_dot: &[-45.84647861450068, -208.53399050543425, 69.42510562634651, -208.53399050543425, -985.8249953161388, 305.04518674622926, 69.42510562634651, 305.04518674622926, -107.45062320795091],
        actor: &[0.5611296908286365, 2.3120496617326642, 4.914359250240585],
    },
    Fixture {
        gains: [0.5467988363991271, 0.271305030815686, 1.7542165224491042, 0.049680709029088894, 0.008129358304529051, 0.4383254755345788],
        gamma: &[7.491220823338008, 0.8768156247928182, -0.046586543253964566, 0.8768156247928182, 3.4773477517540616, -0.7088929552609667, -0.046586543253964566, -0.7088929552609667, 4.640669403089158],
        w_actor: &[-0.8091351820079116, 0.05910379879897925, -0.4895950062802856],
        w_critic: &[0.8545624531310859, -0.9715485115688727, 0.8766026328650387],
        points: &[
            (&[-4.578711598651866, -5.236405219860066, -2.100962294965899], -1.5210236133299682, &[0.25420700697034376, 0.00200186694379873, 0.017927794154299636, 0.00200186694379873, 1.576459794887395e-05, 0.00014118044549774126, 0.017927794154299636, 0.00014118044549774126, 0.0012643467505851875]),
            (&[3.6555360249682667, 3.2743852178000905, 1.389588798345026], 0.9397262079681602, &[1.2302411658905255, -2.423810469501095, 0.054267968152213575, -2.423810469501095, 4.7753703541618435, -0.10691827993796142, 0.054267968152213575, -0.10691827993796142, 0.0023938496361710373]),
            (&[-1.3610522864230366, 1.3480400330014395, -1.0974294825423334], -1.2013988771197082, &[0.5261449105457457, -0.9167614548779085, 0.27254079508824325, -0.9167614548779085, 1.5973765939845317, -0.4748784808343331, 0.27254079508824325, -0.4748784808343331, 0.14117495674392472]),
        ],
        critic: &[-8.483995927417551, -3.6089270397510678, -1.6798836475054235],
        gamma_dot: &[-47.46682735141187, -21.04672241877417, -8.744576409471243, -21.046722418774166, -12.522517651727439, -2.223901740145978, -8.744576409471241, -2.2239017401459766, -2.451143964646304],
        actor: &[2.9899793114894373, -1.8555229866473404, 2.441532764755523],
    },
    Fixture {
        gains: [0.01586150387827424, 1.680368798755215, 1.819551740750361, 0.04453349547073243, 0.030530861176986508, 0.03401358768906629],
        gamma: &[9.059490198486689, 3.4260321816950876, 3.167517885671468, 3.4260321816950876, 5.460535990680118, 1.7923149602594217, 3.167517885671468, 1.7923149602594217, 5.268986737181834],
        w_actor: &[0.8779097900984013, 1.698437695911691, 0.38983442136617874],
        w_critic: &[0.9460304564262813, 1.8121165247471582, 0.20299055190558077],
        points: &[
            (&[-1.549396723494783, -4.494081317901682, 0.8872689125411508], 1.0976933587930149, &[0.02165755456612475, 0.11935929041905967, 0.02394574435286364, 0.11935929041905967, 0.6578138896450035, 0.13196998053439168, 0.02394574435286364, 0.13196998053439168, 0.026475688696154614]),
            (&[1.5018398474011077, -0.5534638471972639, 0.06072179337075644], -1.2583110321903825, &[0.03706673442626454, 0.18776360800717953, -0.20475913778404167, 0.18776360800717953, 0.951127015572563, -1.0372188183787991, -0.20475913778404167, -1.0372188183787991, 1.1311032696842118]),
            (&[-1.0257122113787236, -1.832234163917156, 1.7308602128362167], -0.3151526950576845, &[1.9952808339137762, 1.5026475883402133, -1.308767878883731, 1.5026475883402133, 1.131645097956288, -0.9856341340402811, -1.308767878883731, -0.9856341340402811, 0.8584622934697322]),
            (&[-0.6667737944118106, -1.4108086484159923, 2.7868642253132667], 1.6133774967039864, &[0.13558194598617057, 0.1889099432474191, 0.09763765666646301, 0.1889099432474191, 0.2632132648500502, 0.1360411524227119, 0.09763765666646301, 0.1360411524227119, 0.07031254736740902]),
        ],
        critic: &[8.39310205335797, 4.120310128074399, -4.543062057027038],
        gamma_dot: &[-126.23172391459417, -71.49121144129299, -6.67701466799328, -71.49121144129299, -68.37275475511385, 26.19932249541727, -6.677014667993271, 26.19932249541728, -53.98158960291876],
        actor: &[-1.9273729952282213, -1.4440019611904147, 0.6667708382075748],
    },
    Fixture {
        gains: [0.5064582713905157, 0.6688113139471485, 1.2372740721505908, 0.007700826416181163, 0.051906446360641546, 0.28161783008984875],
        gamma: &[4.931982375802673, -2.611427086138764, 0.8109627697362201, -2.611427086138764, 7.15318377227219, -0.7478378424522326, 0.8109627697362201, -0.7478378424522326, 4.072091618007168],
        w_actor: &[1.460167546575992, 0.049231054948360456, 1.8956444686047453],
        w_critic: &[-0.8195254055421561, 0.327085780475411, -0.23690062022112027],
        points: &[
            (&[2.0513251826802694, -3.4110386023035066, -3.934164722406732], 1.0640303528956363, &[0.31485366731001424, -0.3940244393415449, 0.3322217956719059, -0.3940244393415449, 0.49310290753434316, -0.4157598286691466, 0.3322217956719059, -0.4157598286691466, 0.35054799412830323]),
            (&[0.3230688283894304, 0.8911701158265449, 0.16828070931890768], -0.21626000057556494, &[0.0007532329790133232, -0.02174214184085921, 0.006800147183546026, -0.02174214184085921, 0.6275889996840928, -0.19628689757722598, 0.006800147183546026, -0.19628689757722598, 0.061391366292089855]),
        ],
        critic: &[-2.799836278260634, 5.30726176743627, 2.0663147060686375],
        gamma_dot: &[-12.863592840371462, 23.473805971950377, 9.771713294110974, 23.473805971950373, -52.20508114973667, -17.169722475220606, 9.771713294110976, -17.169722475220606, -7.018374953186175],
        actor: &[-2.912502059435575, 0.44503422011526184, -2.738443890983813],
    },
    Fixture {
        gains: [0.6972651132472153, 1.7148239775762388, 2.170966591163143, 0.08498932979015938, 0.011802492416513526, 0.33291215023077303],
        gamma: &[5.758293456190335, 1.0340493040003527, 1.488051027149589, 1.0340493040003527, 3.953185042059967, 1.7659191289004268, 1.488051027149589, 1.7659191289004268, 6.390147850740007],
        w_actor: &[1.821685117550148, -1.6861164261567418, -0.8564476431024972],
        w_critic: &[0.9009172850167928, -0.6628436994512616, -0.3183351971264662],
        points: &[
            (&[1.2296819169533895, 1.491670367803262, 0.7631687570488099], 0.6282667782911593, &[0.02367435530015718, 0.1814344280699487, 0.059987260577343694, 0.1814344280699487, 1.3904687697599447, 0.45972759031208216, 0.059987260577343694, 0.45972759031208216, 0.15199870855829561]),
            (&[-3.4320620437502827, -0.5406785251897974, -6.693643367223492], 0.4470382367293309, &[0.00035231088916759523, -0.02525648225746713, -0.007300207951522881, -0.02525648225746713, 1.8105880789801707, 0.5233377061920707, -0.007300207951522881, 0.5233377061920707, 0.15126707057336014]),
            (&[1.2658601427803426, -0.3419834432032341, 0.22285874462894212], 0.6334814483210189, &[2.5559824466869934, -0.586169466031323, 1.4962021947423598, -0.586169466031323, 0.1344276222838721, -0.34312756830697594, 1.4962021947423598, -0.34312756830697594, 0.8758358299578719]),
        ],
        critic: &[-3.2696636309117753, -1.037398307757491, 0.40670568846393707],
        gamma_dot: &[-95.10939180179857, -47.932990328777834, -100.26201384899346, -47.932990328777834, -33.943177565541355, -60.01242490345732, -100.26201384899348, -60.01242490345732, -131.39811371369203],
        actor: &[-1.1891714136737919, 2.280185332914648, 1.8446410734641439],
    },

];

pub fn synthetic_point(omega: DVector<f64>, nu: f64, delta: f64, g_sigma: DMatrix<f64>) -> BePoint {
    let l = omega.len();
    BePoint {
        x_eval: DVector::zeros(2),
        rho: (1.0 + nu * omega.norm_squared()).sqrt(),
        omega,
        delta,
        g_sigma,
        u_hat: DVector::zeros(1),
        grad_sigma: DMatrix::zeros(l, 2),
    }
}

impl Fixture {
    pub fn gains(&self) -> AdpGains {
        let [eta_c1, eta_c2, eta_a1, eta_a2, beta, nu] = self.gains;
        AdpGains {
            eta_c1,
            eta_c2,
            eta_a1,
            eta_a2,
            beta,
            nu,
            num_extrap: self.points.len() - 1,
        }
    }

    /// On-trajectory point first, then the extrapolated ones.
    pub fn be_points(&self) -> Vec<BePoint> {
        let nu = self.gains[5];
        self.points
            .iter()
            .map(|(om, d, gs)| synthetic_point(DVector::from_column_slice(om), nu, *d, DMatrix::from_row_slice(3, 3, gs)))
            .collect()
    }

    pub fn gamma(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(3, 3, self.gamma)
    }

    pub fn expected_gamma_dot(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(3, 3, self.gamma_dot)
    }
}
