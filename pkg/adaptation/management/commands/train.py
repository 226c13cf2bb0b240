from adaptation.management.base import AdaptationCommand
from adaptation.services.experiments import ExperimentService, run_experiment
from adaptation.services.run_config import load_run_config, parse_overrides


class Command(AdaptationCommand):
    help = ('Train one stance-adaptation configuration and write checkpoint, training log and '
            'metrics to its output directory')

    def add_arguments(self, parser):
        parser.add_argument('config', help='Run configuration file with key = value lines')
        parser.add_argument(
            '--set',
            dest='assignments',
            action='append',
            default=[],
            metavar='KEY=VALUE',
            help='Override one configuration key; repeatable',
        )
        parser.add_argument('--aligner', help='Aligner: none, coral, h-adversarial or wasserstein (aliases so, dann, wdgrl)')
        parser.add_argument('--view', dest='view_mode', help='View mode: single, dual, dual-subj-only or dual-obj-only')
        parser.add_argument('--seed', type=int, help='Random seed (falls back to DAN_SEED)')
        parser.add_argument('--output-dir', help='Directory for checkpoint, training log and metrics')
        parser.add_argument(
            '--record',
            action='store_true',
            help='Also store the run and its iteration trace in the database',
        )

    def run(self, **options):
        overrides = parse_overrides(options['assignments'])
        for key in ('aligner', 'view_mode', 'seed', 'output_dir'):
            if options.get(key) is not None:
                overrides[key] = options[key]
        config = load_run_config(options['config'], overrides)

        if options['record']:
            service = ExperimentService()
            run = service.execute(service.create_run(user=None, config=config))
            metrics = {
                'variant': run.variant,
                'seed': run.seed,
                'best_iteration': run.best_iteration,
                'val_macro_f1': run.val_macro_f1,
                'target_macro_f1': run.target_macro_f1,
                'output_dir': run.output_dir,
                'run_id': run.id,
            }
        else:
            result = run_experiment(config)
            metrics = {
                'variant': result.metrics['variant'],
                'seed': result.metrics['seed'],
                'best_iteration': result.metrics['best_iteration'],
                'val_macro_f1': result.metrics['val_macro_f1'],
                'target_macro_f1': result.metrics['target_macro_f1'],
                'output_dir': config['output_dir'],
            }
        self.write_mapping(metrics)
        self.stderr.write(self.style.SUCCESS(f"Training finished; outputs in {metrics['output_dir']}"))
